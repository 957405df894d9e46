"""LCP-stability: degenerate cones, weak degeneracy and the stability margin."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .analysis import _minor_is_zero
from .cones import Cone, cone_distance, cone_membership, facet_family, span_distance
from .core import (
    MAX_ENUM_DIM,
    SINGULAR_RTOL,
    as_matrix,
    complementary_matrix,
    fmt_alpha,
    is_singular,
    subsets,
)
from .errors import DimensionExceeded

DEGENERATE_CONE = "DEGENERATE_CONE"
FACET_CONTAINMENT = "FACET_CONTAINMENT"
MAX_FACET_DIM = 12
MAX_MINOR_DIM = 10


def degenerate_cones(M, tol: float = SINGULAR_RTOL) -> list[tuple[int, ...]]:
    """Every alpha whose complementary matrix is singular."""
    M = as_matrix(M)
    n = M.shape[0]
    if n > MAX_ENUM_DIM:
        raise DimensionExceeded(f"n={n} exceeds enumeration limit {MAX_ENUM_DIM}")
    return [a for a in subsets(n) if is_singular(complementary_matrix(M, a), tol)]


@dataclass(frozen=True)
class WeakWitness:
    kind: str
    k: int | None = None
    facet: Cone | None = None
    alpha: tuple[int, ...] | None = None

    def describe(self) -> str:
        if self.kind == DEGENERATE_CONE:
            return f"degenerate cone alpha={fmt_alpha(self.alpha)}"
        return f"k={self.k + 1}, facet {self.facet.describe()}"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "k": self.k,
                "facet": None if self.facet is None else self.facet.to_dict(),
                "alpha": None if self.alpha is None else list(self.alpha)}

    @classmethod
    def from_dict(cls, d: dict) -> "WeakWitness":
        return cls(d["kind"], d["k"],
                   None if d["facet"] is None else Cone.from_dict(d["facet"]),
                   None if d["alpha"] is None else tuple(d["alpha"]))


def _normalized_column(M: np.ndarray, k: int) -> np.ndarray | None:
    c = M[:, k]
    nrm = np.linalg.norm(c)
    return None if nrm == 0.0 else c / nrm


def weak_degeneracy_witness(M, tol: float = 1e-8) -> WeakWitness | None:
    """First reason M is weakly degenerate, or None.

    Facet containment of a column is searched first (k ascending, facets
    in T_k order); a degenerate cone is reported only when no column
    sits in a facet.
    """
    M = as_matrix(M)
    n = M.shape[0]
    if n > MAX_FACET_DIM:
        raise DimensionExceeded(f"n={n} exceeds facet enumeration limit {MAX_FACET_DIM}")
    for k in range(n):
        v = _normalized_column(M, k)
        if v is None:
            continue
        for S in facet_family(M, k):
            if cone_membership(S.generators, -v, tol) is not None:
                return WeakWitness(FACET_CONTAINMENT, k, S)
    degs = degenerate_cones(M)
    if degs:
        return WeakWitness(DEGENERATE_CONE, alpha=degs[0])
    return None


def is_weakly_degenerate(M, tol: float = 1e-8) -> tuple[bool, WeakWitness | None]:
    w = weak_degeneracy_witness(M, tol)
    return w is not None, w


def is_lcp_stable(M, tol: float = 1e-8) -> bool:
    return weak_degeneracy_witness(M, tol) is None


def minors_sufficient(M, rtol: float = 1e-12) -> bool:
    """True iff every square minor of M is nonzero (sufficient for stability)."""
    M = as_matrix(M)
    n = M.shape[0]
    if n > MAX_MINOR_DIM:
        raise DimensionExceeded(f"n={n} exceeds minor enumeration limit {MAX_MINOR_DIM}")
    for size in range(1, n + 1):
        for rows in combinations(range(n), size):
            for cols in combinations(range(n), size):
                if _minor_is_zero(M, list(rows), list(cols), rtol):
                    return False
    return True


@dataclass(frozen=True)
class MarginTerm:
    """Where the margin is attained: set "A" (facet of T_k) or "B" (span)."""

    set: str
    k: int
    value: float
    facet: Cone | None = None
    alpha: tuple[int, ...] | None = None

    def to_dict(self) -> dict:
        return {"set": self.set, "k": self.k, "value": self.value,
                "facet": None if self.facet is None else self.facet.to_dict(),
                "alpha": None if self.alpha is None else list(self.alpha)}

    @classmethod
    def from_dict(cls, d: dict) -> "MarginTerm":
        return cls(d["set"], int(d["k"]), float(d["value"]),
                   None if d["facet"] is None else Cone.from_dict(d["facet"]),
                   None if d["alpha"] is None else tuple(d["alpha"]))


@dataclass(frozen=True)
class MarginBreakdown:
    value: float
    argmin: MarginTerm | None
    A: list[MarginTerm] = field(default_factory=list)
    B: list[MarginTerm] = field(default_factory=list)


def stability_margin(M, breakdown: bool = False):
    """sm(M): least distance of a normalized column -M_k to T_k facets or facet spans.

    Returns a float, or a MarginBreakdown with all A/B terms if
    ``breakdown`` is set.
    """
    M = as_matrix(M)
    n = M.shape[0]
    if n > MAX_FACET_DIM:
        raise DimensionExceeded(f"n={n} exceeds facet enumeration limit {MAX_FACET_DIM}")
    cols = [_normalized_column(M, k) for k in range(n)]
    if any(c is None for c in cols):
        k = next(i for i, c in enumerate(cols) if c is None)
        term = MarginTerm("B", k, 0.0, alpha=(k,))
        return MarginBreakdown(0.0, term, [], [term]) if breakdown else 0.0

    A_terms: list[MarginTerm] = []
    B_terms: list[MarginTerm] = []
    for k in range(n):
        v = -cols[k]
        for S in facet_family(M, k):
            A_terms.append(MarginTerm("A", k, cone_distance(S.generators, v), facet=S))
        seen = set()
        for alpha in subsets(n):
            C = complementary_matrix(M, alpha)
            keep = [j for j in range(n) if j != k]
            key = frozenset(("M", j) if j in alpha else ("I", j) for j in keep)
            if key in seen:
                continue
            seen.add(key)
            B_terms.append(MarginTerm("B", k, span_distance(C[:, keep], v), alpha=alpha))
    best = min(A_terms + B_terms, key=lambda t: t.value)
    value = min(1.0, max(0.0, best.value))
    if breakdown:
        return MarginBreakdown(value, best, A_terms, B_terms)
    return value


@dataclass(frozen=True)
class StabilityReport:
    degenerate_alphas: list[tuple[int, ...]]
    weak_witness: WeakWitness | None
    is_stable: bool
    margin: float
    margin_argmin: MarginTerm | None

    def to_dict(self) -> dict:
        return {"degenerate_alphas": [list(a) for a in self.degenerate_alphas],
                "weak_witness": None if self.weak_witness is None else self.weak_witness.to_dict(),
                "is_stable": self.is_stable, "margin": self.margin,
                "margin_argmin": None if self.margin_argmin is None else self.margin_argmin.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "StabilityReport":
        w, a = d["weak_witness"], d["margin_argmin"]
        return cls([tuple(x) for x in d["degenerate_alphas"]],
                   None if w is None else WeakWitness.from_dict(w),
                   bool(d["is_stable"]), float(d["margin"]),
                   None if a is None else MarginTerm.from_dict(a))


def stability_report(M, tol: float = 1e-8) -> StabilityReport:
    M = as_matrix(M)
    witness = weak_degeneracy_witness(M, tol)
    bd = stability_margin(M, breakdown=True)
    margin = 0.0 if witness is not None else bd.value
    return StabilityReport(degenerate_cones(M), witness, witness is None, margin, bd.argmin)


@dataclass(frozen=True)
class Extremum:
    kind: str  # "max" or "min"
    x: float
    value: float


def margin_extrema(f: Callable[[float], float], a: float, b: float,
                   step: float = 1e-3) -> list[Extremum]:
    """Interior local extrema of a scalar function by grid scan plus bounded refinement."""
    xs = np.arange(a, b + 0.5 * step, step)
    ys = np.array([f(x) for x in xs])
    out = []
    for i in range(1, len(xs) - 1):
        for kind, sgn in (("max", -1.0), ("min", 1.0)):
            if sgn * ys[i] <= sgn * ys[i - 1] and sgn * ys[i] < sgn * ys[i + 1]:
                res = minimize_scalar(lambda t: sgn * f(t), bounds=(xs[i - 1], xs[i + 1]),
                                      method="bounded", options={"xatol": 1e-10})
                x = float(res.x)
                y = float(f(x))
                if sgn * y > sgn * ys[i]:
                    x, y = float(xs[i]), float(ys[i])
                out.append(Extremum(kind, x, y))
    return out

