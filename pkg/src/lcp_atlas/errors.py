"""Exception hierarchy shared by all modules."""


class LcpError(Exception):
    """Base class for every error raised by lcp_atlas."""


class DimensionMismatch(LcpError, ValueError):
    pass


class DimensionExceeded(LcpError, ValueError):
    pass


class DimensionUnsupported(LcpError, ValueError):
    pass


class PivotLimitExceeded(LcpError, RuntimeError):
    pass


class DegenerateIndex(LcpError, ArithmeticError):
    pass


class NotR0(LcpError, ValueError):
    pass


class ProbeExhausted(LcpError, RuntimeError):
    pass


class SingularPivotBlock(LcpError, ArithmeticError):
    pass


class NonpositiveScale(LcpError, ValueError):
    pass


class UnstableMatrix(LcpError, ValueError):
    pass


class SingularA(LcpError, ArithmeticError):
    pass


class SingularB(LcpError, ArithmeticError):
    pass


class NotPMatrix(LcpError, ValueError):
    pass


class InvalidParameter(LcpError, ValueError):
    pass
