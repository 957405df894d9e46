"""LCP data model, the piecewise-linear map f_M and exact solvers.

Index sets (``alpha``) are tuples of 0-based column indices in increasing
order.  Reports and the CLI print them 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import DimensionExceeded, DimensionMismatch, PivotLimitExceeded

CONTINUUM = "CONTINUUM"

SINGULAR_RTOL = 1e-9
SIGN_TOL = 1e-8
DEDUP_ATOL = 1e-7
MAX_ENUM_DIM = 16


def as_matrix(M, square: bool = True) -> np.ndarray:
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise DimensionMismatch(f"expected a non-empty 2-D matrix, got shape {M.shape}")
    if square and M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    return M


def as_vector(v, n: int | None = None) -> np.ndarray:
    v = np.array(v, dtype=float).reshape(-1)
    if n is not None and v.shape[0] != n:
        raise DimensionMismatch(f"expected a vector of length {n}, got {v.shape[0]}")
    return v


def check_alpha(alpha: Sequence[int], n: int) -> tuple[int, ...]:
    a = tuple(sorted(int(i) for i in alpha))
    if len(set(a)) != len(a):
        raise DimensionMismatch(f"index set {alpha} has duplicates")
    if a and (a[0] < 0 or a[-1] >= n):
        raise DimensionMismatch(f"index set {alpha} out of range for n={n}")
    return a


def subsets(n: int) -> Iterator[tuple[int, ...]]:
    """All index sets of {0..n-1}, by size then lexicographically."""
    for k in range(n + 1):
        yield from combinations(range(n), k)


def fmt_alpha(alpha: Sequence[int]) -> str:
    return "{" + ",".join(str(i + 1) for i in alpha) + "}"


def is_singular(C: np.ndarray, rtol: float = SINGULAR_RTOL) -> bool:
    """Scale-invariant rank decision: smallest singular value vs largest."""
    s = np.linalg.svd(C, compute_uv=False)
    if s[0] == 0.0:
        return True
    return bool(s[-1] <= rtol * s[0])


@dataclass(frozen=True)
class LcpInstance:
    M: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        M = as_matrix(self.M)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "q", as_vector(self.q, M.shape[0]))

    @property
    def n(self) -> int:
        return self.M.shape[0]

    def solve(self, method: str = "enumerate", **kw):
        if method == "enumerate":
            return solve_enumerate(self.M, self.q, **kw)
        if method == "lemke":
            return solve_lemke(self.M, self.q, **kw)
        raise ValueError(f"unknown method {method!r}")


def complementary_matrix(M, alpha: Sequence[int]) -> np.ndarray:
    """C_M(alpha): column j is -M[:, j] for j in alpha, else the unit vector e_j."""
    M = as_matrix(M)
    n = M.shape[0]
    alpha = check_alpha(alpha, n)
    C = np.eye(n)
    if alpha:
        idx = list(alpha)
        C[:, idx] = -M[:, idx]
    return C


def f_eval(M, x) -> np.ndarray:
    """Evaluate f_M(x) = [x]^+ - M [-x]^+."""
    M = as_matrix(M)
    x = as_vector(x, M.shape[0])
    return np.maximum(x, 0.0) - M @ np.maximum(-x, 0.0)


def orthant_of(x) -> tuple[int, ...]:
    """The index set of strictly negative coordinates of x."""
    return tuple(int(i) for i in np.flatnonzero(np.asarray(x) < 0))


def z_from_x(x) -> np.ndarray:
    return np.maximum(-np.asarray(x, dtype=float), 0.0)


def x_from_z(M, q, z) -> np.ndarray:
    M = as_matrix(M)
    n = M.shape[0]
    z = as_vector(z, n)
    return (M - np.eye(n)) @ z + as_vector(q, n)


def _x_from_coeffs(p: np.ndarray, alpha: tuple[int, ...]) -> np.ndarray:
    # coefficients on the columns of C_M(alpha) -> point of orthant alpha
    x = p.copy()
    if alpha:
        x[list(alpha)] *= -1.0
    return x


@dataclass(frozen=True)
class Solution:
    """One isolated LCP solution tagged with its complementary cone."""

    alpha: tuple[int, ...]
    z: np.ndarray
    x: np.ndarray
    w: np.ndarray

    def to_dict(self) -> dict:
        return {"alpha": list(self.alpha), "z": self.z.tolist(),
                "x": self.x.tolist(), "w": self.w.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Solution":
        return cls(tuple(d["alpha"]), np.array(d["z"], float),
                   np.array(d["x"], float), np.array(d["w"], float))


@dataclass(frozen=True)
class DegenerateFamily:
    """A continuum of solutions living in a degenerate cone.

    ``particular_x`` is one solution; every ``x + sum(t_i g_i)`` with
    ``g_i`` in ``nullspace_generators`` that stays in the closed orthant
    ``alpha`` is a solution too.  ``endpoints`` is filled when the family
    is a bounded segment.
    """

    alpha: tuple[int, ...]
    particular_x: np.ndarray
    nullspace_generators: list[np.ndarray]
    endpoints: list[np.ndarray] | None = None

    @property
    def particular_z(self) -> np.ndarray:
        return z_from_x(self.particular_x)

    def contains(self, x, tol: float = 1e-7) -> bool:
        """Whether x lies on the family's affine piece within the closed orthant."""
        x = np.asarray(x, dtype=float)
        s = np.ones_like(x)
        if self.alpha:
            s[list(self.alpha)] = -1.0
        if np.any(s * x < -tol):
            return False
        d = x - self.particular_x
        if not self.nullspace_generators:
            return bool(np.linalg.norm(d) <= tol)
        G = np.column_stack(self.nullspace_generators)
        coef, *_ = np.linalg.lstsq(G, d, rcond=None)
        return bool(np.linalg.norm(G @ coef - d) <= tol * (1 + np.linalg.norm(d)))

    def to_dict(self) -> dict:
        return {
            "alpha": list(self.alpha),
            "particular_x": self.particular_x.tolist(),
            "nullspace_generators": [g.tolist() for g in self.nullspace_generators],
            "endpoints": None if self.endpoints is None else [e.tolist() for e in self.endpoints],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DegenerateFamily":
        ends = d.get("endpoints")
        return cls(
            tuple(d["alpha"]),
            np.array(d["particular_x"], float),
            [np.array(g, float) for g in d["nullspace_generators"]],
            None if ends is None else [np.array(e, float) for e in ends],
        )


@dataclass
class SolutionSet:
    isolated: list[Solution] = field(default_factory=list)
    degenerate: list[DegenerateFamily] = field(default_factory=list)

    @property
    def count(self) -> int | str:
        return CONTINUUM if self.degenerate else len(self.isolated)

    @property
    def is_continuum(self) -> bool:
        return bool(self.degenerate)

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "isolated": [s.to_dict() for s in self.isolated],
            "degenerate": [f.to_dict() for f in self.degenerate],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolutionSet":
        return cls([Solution.from_dict(s) for s in d["isolated"]],
                   [DegenerateFamily.from_dict(f) for f in d["degenerate"]])


def _nullspace(C: np.ndarray, rtol: float = SINGULAR_RTOL) -> np.ndarray:
    _, s, Vt = np.linalg.svd(C)
    rank = int(np.sum(s > rtol * s[0])) if s[0] > 0 else 0
    return Vt[rank:].T


def _has_feasible_direction(N: np.ndarray, tight: np.ndarray) -> bool:
    """Is there d = N y != 0 with d[tight] >= 0?  (N has full column rank.)"""
    r = N.shape[1]
    if r == 0:
        return False
    A = N[tight]
    if A.shape[0] == 0:
        return True
    if np.linalg.matrix_rank(A, tol=SINGULAR_RTOL * max(1.0, np.abs(A).max())) < r:
        return True
    # maximise 1'Ay subject to 0 <= Ay <= 1
    res = linprog(-A.sum(axis=0), A_ub=np.vstack([-A, A]),
                  b_ub=np.concatenate([np.zeros(len(A)), np.ones(len(A))]),
                  bounds=[(None, None)] * r, method="highs")
    return bool(res.status == 0 and -res.fun > 1e-9)


def _segment(p: np.ndarray, d: np.ndarray, tol: float):
    lo, hi = -np.inf, np.inf
    for pi, di in zip(p, d):
        if di > tol:
            lo = max(lo, -pi / di)
        elif di < -tol:
            hi = min(hi, -pi / di)
    return lo, hi


def solve_enumerate(M, q, tol: float | None = None, max_dim: int = MAX_ENUM_DIM) -> SolutionSet:
    """Solve lcp(M, q) by visiting every complementary cone.

    Nonsingular cones contribute at most one isolated solution; singular
    cones containing q contribute either a single point or a continuum
    family (reported as particular point + kernel directions).
    """
    from .cones import cone_membership

    M = as_matrix(M)
    n = M.shape[0]
    q = as_vector(q, n)
    if n > max_dim:
        raise DimensionExceeded(f"n={n} exceeds enumeration limit {max_dim}")
    qscale = 1.0 + np.linalg.norm(q)
    sign_tol = (SIGN_TOL if tol is None else tol) * qscale

    points: list[tuple[tuple[int, ...], np.ndarray]] = []
    families: list[DegenerateFamily] = []
    for alpha in subsets(n):
        C = complementary_matrix(M, alpha)
        if not is_singular(C):
            p = np.linalg.solve(C, q)
            if np.all(p >= -sign_tol):
                points.append((alpha, _x_from_coeffs(np.maximum(p, 0.0), alpha)))
            continue
        p = cone_membership(C, q, tol=SIGN_TOL if tol is None else tol)
        if p is None:
            continue
        N = _nullspace(C)
        tight = p <= sign_tol
        if not _has_feasible_direction(N, tight):
            points.append((alpha, _x_from_coeffs(p, alpha)))
            continue
        s = np.ones(n)
        if alpha:
            s[list(alpha)] = -1.0
        gens = [s * N[:, j] for j in range(N.shape[1])]
        ends = None
        if N.shape[1] == 1:
            lo, hi = _segment(p, N[:, 0], 1e-12)
            if np.isfinite(lo) and np.isfinite(hi):
                ends = [_x_from_coeffs(np.maximum(p + lo * N[:, 0], 0.0), alpha),
                        _x_from_coeffs(np.maximum(p + hi * N[:, 0], 0.0), alpha)]
        families.append(DegenerateFamily(alpha, _x_from_coeffs(p, alpha), gens, ends))

    isolated: list[Solution] = []
    for alpha, x in points:
        if any(np.max(np.abs(x - s.x)) <= DEDUP_ATOL for s in isolated):
            continue
        if any(f.contains(x) for f in families):
            continue
        z = z_from_x(x)
        isolated.append(Solution(alpha, z, x, M @ z + q))
    return SolutionSet(isolated, families)


@dataclass(frozen=True)
class LemkeResult:
    status: str  # "solution" or "ray"
    z: np.ndarray | None
    pivots: int

    @property
    def ok(self) -> bool:
        return self.status == "solution"


RAY_TERMINATION = "ray"


def _lex_min_row(T: np.ndarray, rows: np.ndarray, col: int, n: int, tol: float) -> int:
    cand = rows
    # lexicographic ratio test on [q | B^-1] (B^-1 sits in the w columns)
    for j in [T.shape[1] - 1] + list(range(n)):
        ratios = T[cand, j] / T[cand, col]
        m = ratios.min()
        keep = ratios <= m + tol * (1.0 + abs(m))
        cand = cand[keep]
        if len(cand) == 1:
            break
    return int(cand[0])


def solve_lemke(M, q, tol: float = 1e-10, max_pivots: int | None = None) -> LemkeResult:
    """Lemke's complementary pivoting with covering vector e and lexicographic ties."""
    M = as_matrix(M)
    n = M.shape[0]
    q = as_vector(q, n)
    if max_pivots is None:
        max_pivots = 50 * n * n + 100
    if np.all(q >= 0):
        return LemkeResult("solution", np.zeros(n), 0)

    # columns: w (0..n-1), z (n..2n-1), z0 (2n), rhs (2n+1)
    T = np.hstack([np.eye(n), -M, -np.ones((n, 1)), q.reshape(-1, 1)])
    basis = list(range(n))

    def pivot(r: int, c: int):
        T[r] /= T[r, c]
        for i in range(n):
            if i != r and T[i, c] != 0.0:
                T[i] -= T[i, c] * T[r]
        leaving = basis[r]
        basis[r] = c
        return leaving

    z0 = 2 * n
    rows = np.arange(n)
    # z0 enters at the most negative q; ties broken lexicographically
    qmin = q.min()
    cand = rows[q <= qmin + tol * (1 + abs(qmin))]
    if len(cand) > 1:
        T[:, z0] *= -1.0
        r = _lex_min_row(T, cand, z0, n, tol)
        T[:, z0] *= -1.0
    else:
        r = int(cand[0])
    leaving = pivot(r, z0)
    pivots = 1
    while True:
        entering = leaving + n if leaving < n else leaving - n
        col = T[:, entering]
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            return LemkeResult(RAY_TERMINATION, None, pivots)
        r = _lex_min_row(T, rows, entering, n, tol)
        leaving = pivot(r, entering)
        pivots += 1
        if leaving == z0:
            break
        if pivots >= max_pivots:
            raise PivotLimitExceeded(f"Lemke exceeded {max_pivots} pivots")
    z = np.zeros(n)
    for i, b in enumerate(basis):
        if n <= b < 2 * n:
            z[b - n] = T[i, -1]
    return LemkeResult("solution", np.maximum(z, 0.0), pivots)


def check_solution(M, q, z, tol: float = 1e-8) -> bool:
    """Complementarity residual check used by tests and the CLI."""
    M = as_matrix(M)
    z = np.asarray(z, float)
    w = M @ z + np.asarray(q, float)
    scale = 1.0 + np.linalg.norm(q)
    return bool(np.all(z >= -tol * scale) and np.all(w >= -tol * scale)
                and abs(z @ w) <= tol * scale * (1.0 + np.linalg.norm(z)))
