"""Matrix-class predicates, R0 test, index/degree and singularity flags."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import linprog

from .cones import in_skeleton
from .core import (
    MAX_ENUM_DIM,
    as_matrix,
    as_vector,
    check_alpha,
    complementary_matrix,
    is_singular,
    orthant_of,
    solve_enumerate,
    subsets,
)
from .errors import DegenerateIndex, DimensionExceeded, DimensionUnsupported, NotR0, ProbeExhausted

MINOR_RTOL = 1e-12
MAX_PROBES = 1000


@dataclass(frozen=True)
class R0Result:
    is_r0: bool
    alpha: tuple[int, ...] | None = None
    p: np.ndarray | None = None

    def __bool__(self) -> bool:
        return self.is_r0


def is_R0(M, tol: float = 1e-9) -> R0Result:
    """Decide whether every C_M(alpha) has kernel meeting R^n_+ only at 0.

    Nonsingular cones are skipped; for singular ones the LP
    max 1'p s.t. C p = 0, 0 <= p <= 1 is solved and a positive optimum
    is a witness of failure.
    """
    M = as_matrix(M)
    n = M.shape[0]
    if n > MAX_ENUM_DIM:
        raise DimensionExceeded(f"n={n} exceeds enumeration limit {MAX_ENUM_DIM}")
    for alpha in subsets(n):
        C = complementary_matrix(M, alpha)
        if not is_singular(C):
            continue
        res = linprog(-np.ones(n), A_eq=C, b_eq=np.zeros(n), bounds=[(0.0, 1.0)] * n, method="highs")
        if res.status == 0 and -res.fun > tol:
            p = np.maximum(res.x, 0.0)
            return R0Result(False, alpha, p)
    return R0Result(True)


def _minor(M: np.ndarray, rows, cols) -> float:
    if len(rows) == 0:
        return 1.0
    return float(np.linalg.det(M[np.ix_(rows, cols)]))


def _minor_is_zero(M: np.ndarray, rows, cols, rtol: float = MINOR_RTOL) -> bool:
    if len(rows) == 0:
        return False
    sub = M[np.ix_(rows, cols)]
    # Hadamard bound gives a scale for the determinant
    scale = float(np.prod(np.linalg.norm(sub, axis=0)))
    return scale == 0.0 or abs(np.linalg.det(sub)) <= rtol * scale


def index_at(M, alpha) -> int:
    """ind = sgn det M[alpha, alpha], with +1 for the empty set."""
    M = as_matrix(M)
    alpha = list(check_alpha(alpha, M.shape[0]))
    if not alpha:
        return 1
    if _minor_is_zero(M, alpha, alpha):
        raise DegenerateIndex(f"principal minor on {alpha} vanishes")
    return 1 if _minor(M, alpha, alpha) > 0 else -1


def all_principal_minors(M) -> list[tuple[tuple[int, ...], float]]:
    M = as_matrix(M)
    n = M.shape[0]
    if n > MAX_ENUM_DIM:
        raise DimensionExceeded(f"n={n} exceeds enumeration limit {MAX_ENUM_DIM}")
    return [(a, _minor(M, a, a)) for a in subsets(n) if a]


def is_P(M, rtol: float = MINOR_RTOL) -> bool:
    """True iff every principal minor is positive (beyond a relative zero band)."""
    M = as_matrix(M)
    for a, d in all_principal_minors(M):
        if d <= 0 or _minor_is_zero(M, a, a, rtol):
            return False
    return True


def is_strictly_copositive_small(M, tol: float = 1e-12) -> bool:
    """Exact test of x'Mx > 0 on R^n_+ minus 0 for n <= 3.

    Minimises x'Sx (S the symmetric part) over the unit simplex by
    enumerating KKT points in the relative interior of every face.
    Faces with a singular bordered system are skipped: the quadratic is
    affine along the kernel direction there, so the face minimum sits on
    a smaller face that is enumerated anyway.
    """
    M = as_matrix(M)
    n = M.shape[0]
    if n > 3:
        raise DimensionUnsupported("strict copositivity is decided only for n <= 3")
    S = 0.5 * (M + M.T)
    best = np.inf
    for size in range(1, n + 1):
        for J in combinations(range(n), size):
            J = list(J)
            k = len(J)
            K = np.zeros((k + 1, k + 1))
            K[:k, :k] = S[np.ix_(J, J)]
            K[:k, k] = -1.0
            K[k, :k] = 1.0
            if is_singular(K, 1e-12):
                continue
            sol = np.linalg.solve(K, np.r_[np.zeros(k), 1.0])
            xJ = sol[:k]
            if np.any(xJ < -1e-12):
                continue
            best = min(best, float(xJ @ S[np.ix_(J, J)] @ xJ))
    return bool(best > tol * max(1.0, np.abs(S).max()))


@dataclass(frozen=True)
class DegreeReport:
    degree: int
    probe_q: np.ndarray
    per_solution_indices: list[tuple[tuple[int, ...], int]] = field(default_factory=list)
    probes_tried: int = 1

    def to_dict(self) -> dict:
        return {"degree": self.degree, "probe_q": self.probe_q.tolist(),
                "per_solution_indices": [[list(a), s] for a, s in self.per_solution_indices],
                "probes_tried": self.probes_tried}

    @classmethod
    def from_dict(cls, d: dict) -> "DegreeReport":
        return cls(int(d["degree"]), np.array(d["probe_q"], float),
                   [(tuple(a), int(s)) for a, s in d["per_solution_indices"]],
                   int(d["probes_tried"]))


def degree_at(M, q, boundary_tol: float = 1e-7) -> list[tuple[tuple[int, ...], int]] | None:
    """Indices of the solutions at q, or None if q is not a regular value."""
    sols = solve_enumerate(M, q)
    if sols.is_continuum:
        return None
    out = []
    for s in sols.isolated:
        if np.any(np.abs(s.x) <= boundary_tol * (1.0 + np.linalg.norm(q))):
            return None
        alpha = orthant_of(s.x)
        try:
            out.append((alpha, index_at(M, alpha)))
        except DegenerateIndex:
            return None
    return out


def degree(M, seed: int = 0, tol: float = 1e-7, check_r0: bool = True) -> DegreeReport:
    """Degree of f_M from one generic probe q drawn uniformly on the sphere."""
    M = as_matrix(M)
    n = M.shape[0]
    if check_r0 and not is_R0(M):
        raise NotR0("the degree is only defined globally for R0 matrices")
    rng = np.random.default_rng(seed)
    for tries in range(1, MAX_PROBES + 1):
        q = rng.standard_normal(n)
        q /= np.linalg.norm(q)
        if in_skeleton(M, q, tol):
            continue
        idx = degree_at(M, q, tol)
        if idx is None:
            continue
        return DegreeReport(sum(s for _, s in idx), q, idx, tries)
    raise ProbeExhausted(f"no generic probe found in {MAX_PROBES} draws")


@dataclass(frozen=True)
class SingularityFlags:
    on_orthant_boundary: bool
    singular_piece: tuple[int, ...] | None = None

    @property
    def any(self) -> bool:
        return self.on_orthant_boundary or self.singular_piece is not None

    def to_dict(self) -> dict:
        return {"on_orthant_boundary": self.on_orthant_boundary,
                "singular_piece": None if self.singular_piece is None else list(self.singular_piece)}

    @classmethod
    def from_dict(cls, d: dict) -> "SingularityFlags":
        sp = d["singular_piece"]
        return cls(bool(d["on_orthant_boundary"]), None if sp is None else tuple(sp))


def singularity_flags(M, x, tol: float = 1e-9) -> SingularityFlags:
    """Necessary conditions for a nonsmooth singularity of f_M at x."""
    M = as_matrix(M)
    x = as_vector(x, M.shape[0])
    if np.any(np.abs(x) <= tol):
        return SingularityFlags(True, None)
    alpha = orthant_of(x)
    # C_{-M}(alpha) has +M columns on alpha
    if is_singular(complementary_matrix(-M, alpha)):
        return SingularityFlags(False, alpha)
    return SingularityFlags(False, None)
