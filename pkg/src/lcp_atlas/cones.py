"""Polyhedral cone primitives: membership, distances, facets, K(M) and 2-D cells."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .core import as_matrix, as_vector, check_alpha, complementary_matrix, subsets
from .errors import DimensionMismatch, DimensionUnsupported

RAY_ANGLE_TOL = 1e-9
TWO_PI = 2.0 * math.pi

# generator labels: ("I", j) is the unit vector e_j, ("M", j) is -M[:, j]
Label = tuple[str, int]


def nnls(A, b, maxiter: int | None = None) -> tuple[np.ndarray, float]:
    """Lawson-Hanson active-set solution of min ||Ax - b|| s.t. x >= 0.

    Returns the solution and the residual norm.  Iterations are capped at
    ``100 * n`` outer steps; the loop also stops when the residual stops
    decreasing (stall).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    x = np.zeros(n)
    if n == 0:
        return x, float(np.linalg.norm(b))
    if maxiter is None:
        maxiter = 100 * n
    passive = np.zeros(n, dtype=bool)
    eps = np.finfo(float).eps
    tol = 10 * eps * max(m, n) * max(1.0, np.abs(A).max()) * max(1.0, np.linalg.norm(b))
    r = b.copy()
    w = A.T @ r
    best = np.inf
    for _ in range(maxiter):
        free = ~passive & (w > tol)
        if not free.any():
            break
        j = int(np.argmax(np.where(free, w, -np.inf)))
        passive[j] = True
        while True:
            s = np.zeros(n)
            cols = np.flatnonzero(passive)
            s[cols] = np.linalg.lstsq(A[:, cols], b, rcond=None)[0]
            if np.all(s[cols] > 0):
                x = s
                break
            bad = cols[s[cols] <= 0]
            step = np.min(x[bad] / (x[bad] - s[bad]))
            x = x + step * (s - x)
            drop = passive & (x <= tol)
            x[drop] = 0.0
            passive &= ~drop
            if not passive.any():
                break
        r = b - A @ x
        res = float(np.linalg.norm(r))
        if res >= best * (1 - 1e-15) and res > 0 and best < np.inf:
            # stall: undo the useless activation and stop
            break
        best = res
        w = A.T @ r
    return x, float(np.linalg.norm(b - A @ x))


def _drop_zero_columns(G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keep = np.linalg.norm(G, axis=0) > 0 if G.size else np.zeros(G.shape[1], bool)
    return G[:, keep], np.flatnonzero(keep)


def _as_generators(G, v) -> tuple[np.ndarray, np.ndarray]:
    v = as_vector(v)
    G = np.array(G, dtype=float)
    if G.ndim == 1:
        G = G.reshape(-1, 1)
    if G.size == 0:
        G = np.zeros((v.shape[0], 0))
    if G.shape[0] != v.shape[0]:
        raise DimensionMismatch(f"generators have {G.shape[0]} rows, vector has {v.shape[0]}")
    return G, v


def cone_membership(G, v, tol: float = 1e-8) -> np.ndarray | None:
    """Coefficients p >= 0 with G p = v (within tol), or None if v is not in pos G."""
    G, v = _as_generators(G, v)
    Gk, keep = _drop_zero_columns(G)
    p = np.zeros(G.shape[1])
    coef, res = nnls(Gk, v)
    if res > tol * (1.0 + np.linalg.norm(v)):
        return None
    p[keep] = coef
    return p


def cone_distance(G, v) -> float:
    """Euclidean distance from v to pos G."""
    G, v = _as_generators(G, v)
    Gk, _ = _drop_zero_columns(G)
    return nnls(Gk, v)[1]


def span_distance(G, v) -> float:
    """Orthogonal distance from v to the linear hull of the columns of G."""
    G, v = _as_generators(G, v)
    Gk, _ = _drop_zero_columns(G)
    if Gk.shape[1] == 0:
        return float(np.linalg.norm(v))
    U, s, _ = np.linalg.svd(Gk, full_matrices=False)
    rank = int(np.sum(s > 1e-12 * s[0]))
    U = U[:, :rank]
    return float(np.linalg.norm(v - U @ (U.T @ v)))


@dataclass(frozen=True)
class Cone:
    """pos of the generator columns, optionally tagged with its origin.

    ``labels`` names each generator: ``("I", j)`` for e_j and ``("M", j)``
    for -M[:, j].  ``alpha``/``dropped`` record the complementary cone and
    removed column when the cone is a facet.
    """

    generators: np.ndarray
    labels: tuple[Label, ...] = ()
    alpha: tuple[int, ...] | None = None
    dropped: int | None = None

    @property
    def key(self) -> frozenset:
        return frozenset(self.labels)

    def describe(self) -> str:
        parts = [("I_" if kind == "I" else "-M_") + str(j + 1) for kind, j in sorted(self.labels, key=lambda l: (l[1], l[0]))]
        return "pos[" + ", ".join(parts) + "]"

    def contains(self, v, tol: float = 1e-8) -> bool:
        return cone_membership(self.generators, v, tol) is not None

    def to_dict(self) -> dict:
        return {"generators": self.generators.tolist(),
                "labels": [list(l) for l in self.labels],
                "alpha": None if self.alpha is None else list(self.alpha),
                "dropped": self.dropped}

    @classmethod
    def from_dict(cls, d: dict) -> "Cone":
        G = np.array(d["generators"], float)
        return cls(G.reshape(len(G), -1) if G.size else G,
                   tuple((str(k), int(j)) for k, j in d["labels"]),
                   None if d["alpha"] is None else tuple(d["alpha"]),
                   d["dropped"])

    def __eq__(self, other):
        if not isinstance(other, Cone):
            return NotImplemented
        return (self.labels == other.labels and self.alpha == other.alpha
                and self.dropped == other.dropped
                and self.generators.shape == other.generators.shape
                and np.array_equal(self.generators, other.generators))

    def __hash__(self):
        return hash((self.labels, self.alpha, self.dropped))


def _column_labels(n: int, alpha: Sequence[int]) -> list[Label]:
    return [("M", j) if j in alpha else ("I", j) for j in range(n)]


def facets_of_cone(M, alpha: Sequence[int]) -> list[Cone]:
    """The n facets of pos C_M(alpha); the i-th drops column i."""
    M = as_matrix(M)
    n = M.shape[0]
    alpha = check_alpha(alpha, n)
    C = complementary_matrix(M, alpha)
    labels = _column_labels(n, alpha)
    out = []
    for i in range(n):
        keep = [j for j in range(n) if j != i]
        out.append(Cone(C[:, keep], tuple(labels[j] for j in keep), alpha, i))
    return out


def facet_family(M, k: int) -> list[Cone]:
    """T_k(M): facets of cones with k not in alpha, deduplicated by generator set."""
    M = as_matrix(M)
    n = M.shape[0]
    if not 0 <= k < n:
        raise DimensionMismatch(f"k={k} out of range for n={n}")
    seen = set()
    out = []
    for alpha in subsets(n):
        if k in alpha:
            continue
        for f in facets_of_cone(M, alpha):
            if f.key not in seen:
                seen.add(f.key)
                out.append(f)
    return out


def all_facets(M) -> list[Cone]:
    """Every distinct facet of every complementary cone (the pieces of K(M))."""
    M = as_matrix(M)
    n = M.shape[0]
    out = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        for choice in product((False, True), repeat=n - 1):
            alpha = tuple(j for j, c in zip(others, choice) if c)
            out.append(facets_of_cone(M, alpha)[i])
    return out


def in_skeleton(M, q, tol: float = 1e-9) -> bool:
    """Whether q lies (within tol, relative to |q|) on some facet of some cone."""
    M = as_matrix(M)
    q = as_vector(q, M.shape[0])
    nq = np.linalg.norm(q)
    if nq == 0.0:
        return True
    u = q / nq
    return any(cone_distance(f.generators, u) <= tol for f in all_facets(M))


def skeleton_distance(M, q) -> float:
    """Distance from q/|q| to K(M); 0 for q = 0."""
    M = as_matrix(M)
    q = as_vector(q, M.shape[0])
    nq = np.linalg.norm(q)
    if nq == 0.0:
        return 0.0
    u = q / nq
    return min(cone_distance(f.generators, u) for f in all_facets(M))


def _wrap(a: float) -> float:
    a = math.fmod(a, TWO_PI)
    return a + TWO_PI if a < 0 else a


@dataclass(frozen=True)
class Sector2D:
    """Open counterclockwise sector from ``start_angle`` to ``end_angle``.

    The sector may wrap through angle 0, in which case ``end_angle`` is
    smaller than ``start_angle``.
    """

    start_angle: float
    end_angle: float
    start_labels: tuple[Label, ...] = ()
    end_labels: tuple[Label, ...] = ()

    @property
    def width(self) -> float:
        w = self.end_angle - self.start_angle
        return w + TWO_PI if w <= 0 else w

    @property
    def boundary_rays(self) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.start_angle, self.end_angle
        return (np.array([math.cos(a), math.sin(a)]), np.array([math.cos(b), math.sin(b)]))

    @property
    def mid_angle(self) -> float:
        return _wrap(self.start_angle + 0.5 * self.width)

    def midpoint(self) -> np.ndarray:
        a = self.mid_angle
        return np.array([math.cos(a), math.sin(a)])

    def contains_angle(self, theta: float) -> bool:
        d = _wrap(theta - self.start_angle)
        return 0.0 < d < self.width

    def to_dict(self) -> dict:
        return {"start_angle": self.start_angle, "end_angle": self.end_angle,
                "start_labels": [list(l) for l in self.start_labels],
                "end_labels": [list(l) for l in self.end_labels]}

    @classmethod
    def from_dict(cls, d: dict) -> "Sector2D":
        return cls(d["start_angle"], d["end_angle"],
                   tuple((str(k), int(j)) for k, j in d["start_labels"]),
                   tuple((str(k), int(j)) for k, j in d["end_labels"]))


def rays_2d(M) -> list[tuple[float, tuple[Label, ...]]]:
    """Distinct ray directions of I_1, I_2, -M_1, -M_2 sorted by angle, with labels."""
    M = as_matrix(M)
    if M.shape != (2, 2):
        raise DimensionUnsupported(f"2-D geometry needs a 2x2 matrix, got {M.shape}")
    raw: list[tuple[float, Label]] = [(0.0, ("I", 0)), (math.pi / 2, ("I", 1))]
    for j in range(2):
        v = -M[:, j]
        if np.linalg.norm(v) > 0:
            raw.append((_wrap(math.atan2(v[1], v[0])), ("M", j)))
    raw.sort(key=lambda t: t[0])
    rays: list[tuple[float, list[Label]]] = []
    for ang, lab in raw:
        if rays and abs(ang - rays[-1][0]) <= RAY_ANGLE_TOL:
            rays[-1][1].append(lab)
        else:
            rays.append((ang, [lab]))
    if len(rays) > 1 and TWO_PI - rays[-1][0] + rays[0][0] <= RAY_ANGLE_TOL:
        ang, labs = rays.pop()
        rays[0][1].extend(labs)
    return [(a, tuple(l)) for a, l in rays]


def cells_2d(M) -> list[Sector2D]:
    """Connected components of R^2 minus K(M), as open angular sectors."""
    rays = rays_2d(M)
    out = []
    for i, (a, la) in enumerate(rays):
        b, lb = rays[(i + 1) % len(rays)]
        out.append(Sector2D(a, b, la, lb))
    return out
