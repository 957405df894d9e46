"""LCP-equivalence transforms, the 2x2 normal form and the 2x2 classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .analysis import is_P
from .cones import Sector2D, cells_2d
from .core import as_matrix, as_vector, check_alpha, is_singular, solve_enumerate
from .errors import DimensionUnsupported, NonpositiveScale, SingularPivotBlock, UnstableMatrix

TWO_PI = 2.0 * math.pi
LINE_TOL = 1e-7
PROXIMITY_WARN = 1e-3

ZERO = "ZERO"
U_COLUMN = "U_COLUMN"
U_SUBSPACE = "U_SUBSPACE"
U_R0 = "U_R0"
STABLE_LABELS = ("C1", "C2", "C3", "C4", "C5")


# ---------------------------------------------------------------- transforms

def _pivot_blocks(M: np.ndarray, beta: tuple[int, ...]):
    n = M.shape[0]
    b = list(beta)
    c = [j for j in range(n) if j not in beta]
    Mbb = M[np.ix_(b, b)]
    if is_singular(Mbb):
        raise SingularPivotBlock(f"M[beta, beta] is singular for beta={[i + 1 for i in b]}")
    return b, c, np.linalg.inv(Mbb)


def ppt(M, beta: Sequence[int]) -> np.ndarray:
    """Principal pivotal transform of M relative to beta."""
    M = as_matrix(M)
    beta = check_alpha(beta, M.shape[0])
    if not beta:
        return M.copy()
    b, c, inv = _pivot_blocks(M, beta)
    N = np.empty_like(M)
    N[np.ix_(b, b)] = inv
    if c:
        N[np.ix_(b, c)] = -inv @ M[np.ix_(b, c)]
        N[np.ix_(c, b)] = M[np.ix_(c, b)] @ inv
        N[np.ix_(c, c)] = M[np.ix_(c, c)] - M[np.ix_(c, b)] @ inv @ M[np.ix_(b, c)]
    return N


def pivot_q_map(M, beta: Sequence[int], q) -> np.ndarray:
    """The block-triangular map phi attached to the pivot of M on beta.

    lcp(M, q) and lcp(ppt(M, beta), pivot_q_map(M, beta, q)) have solutions
    in bijection; see ``pivot_x_map`` for the x-correspondence.
    """
    M = as_matrix(M)
    n = M.shape[0]
    beta = check_alpha(beta, n)
    q = as_vector(q, n)
    if not beta:
        return q.copy()
    b, c, inv = _pivot_blocks(M, beta)
    out = np.empty(n)
    qb = inv @ q[b]
    out[b] = -qb
    if c:
        out[c] = q[c] - M[np.ix_(c, b)] @ qb
    return out


def pivot_q_map_inverse(M, beta: Sequence[int], q_prime) -> np.ndarray:
    """Inverse of ``pivot_q_map`` for the same (M, beta)."""
    M = as_matrix(M)
    n = M.shape[0]
    beta = check_alpha(beta, n)
    qp = as_vector(q_prime, n)
    if not beta:
        return qp.copy()
    b, c, _ = _pivot_blocks(M, beta)
    out = np.empty(n)
    out[b] = -M[np.ix_(b, b)] @ qp[b]
    if c:
        out[c] = qp[c] - M[np.ix_(c, b)] @ qp[b]
    return out


def pivot_x_map(beta: Sequence[int], x) -> np.ndarray:
    """Solution x of lcp(M, q) -> solution of the pivoted problem: flip signs on beta."""
    x = np.array(x, dtype=float)
    if beta:
        x[list(beta)] *= -1.0
    return x


def _check_perm(perm: Sequence[int], n: int) -> list[int]:
    p = [int(i) for i in perm]
    if sorted(p) != list(range(n)):
        raise ValueError(f"{perm} is not a permutation of 0..{n - 1}")
    return p


def permute_conjugate(M, perm: Sequence[int]) -> np.ndarray:
    """P'MP with P the permutation matrix whose j-th column is e_perm[j].

    lcp(M, q) corresponds to lcp(P'MP, q[perm]) with x' = x[perm].
    """
    M = as_matrix(M)
    p = _check_perm(perm, M.shape[0])
    return M[np.ix_(p, p)]


def _check_scale(d, n: int) -> np.ndarray:
    d = as_vector(d, n)
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise NonpositiveScale("scaling vector must be strictly positive")
    return d


def diag_conjugate(M, d) -> np.ndarray:
    """D^-1 M D; lcp(M, q) corresponds to lcp(D^-1 M D, q / d) with x' = x / d."""
    M = as_matrix(M)
    d = _check_scale(d, M.shape[0])
    return (M / d[:, None]) * d[None, :]


def diag_scale(M, d) -> np.ndarray:
    """M D; same q, and x' = x on nonnegative entries, x / d on negative ones."""
    M = as_matrix(M)
    d = _check_scale(d, M.shape[0])
    return M * d[None, :]


def diag_scale_x_map(d, x) -> np.ndarray:
    x = np.array(x, dtype=float)
    d = np.asarray(d, dtype=float)
    neg = x < 0
    x[neg] = x[neg] / d[neg]
    return x


# ---------------------------------------------------------------- 2x2 normal form

def _wrap(a: float) -> float:
    a = math.fmod(a, TWO_PI)
    if a < 0:
        a += TWO_PI
    return 0.0 if a >= TWO_PI else a


@dataclass(frozen=True)
class NormalForm2D:
    """r_i in {0, 1}; theta_i is the ccw angle of -M_i from the ray of e_i.

    Angles of zero columns are None.
    """

    r1: int
    r2: int
    theta1: float | None
    theta2: float | None

    def matrix(self) -> np.ndarray:
        return polar_matrix(self.theta1 or 0.0, self.theta2 or 0.0, self.r1, self.r2)

    def to_dict(self) -> dict:
        return {"r1": self.r1, "r2": self.r2, "theta1": self.theta1, "theta2": self.theta2}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalForm2D":
        return cls(int(d["r1"]), int(d["r2"]), d["theta1"], d["theta2"])


def polar_matrix(theta1: float, theta2: float, r1: float = 1.0, r2: float = 1.0) -> np.ndarray:
    """M(theta1, theta2) of the 2x2 normal form."""
    return np.array([
        [r1 * math.cos(theta1 + math.pi), r2 * math.cos(theta2 + 1.5 * math.pi)],
        [r1 * math.sin(theta1 + math.pi), r2 * math.sin(theta2 + 1.5 * math.pi)],
    ])


def normal_form_2d(M) -> NormalForm2D:
    M = as_matrix(M)
    if M.shape != (2, 2):
        raise DimensionUnsupported(f"normal form is defined for 2x2 matrices, got {M.shape}")
    r, th = [], []
    for k, offset in ((0, 0.0), (1, 0.5 * math.pi)):
        v = -M[:, k]
        if np.linalg.norm(v) == 0.0:
            r.append(0)
            th.append(None)
        else:
            r.append(1)
            th.append(_wrap(math.atan2(v[1], v[0]) - offset))
    return NormalForm2D(r[0], r[1], th[0], th[1])


def _angle_gap(a: float, b: float) -> float:
    d = abs(_wrap(a - b))
    return min(d, TWO_PI - d)


def _line_distances(t1: float, t2: float) -> dict[str, float]:
    h = 0.5 * math.pi
    return {
        U_SUBSPACE: min(_angle_gap(t2, t1 + h), _angle_gap(t1, 3 * h), _angle_gap(t2, h)),
        # theta_k = 0 puts -M_k on the ray of e_k; it belongs with the R0 family
        U_R0: min(_angle_gap(t2, t1 - h), _angle_gap(t1, h), _angle_gap(t2, 3 * h),
                  _angle_gap(t1, 0.0), _angle_gap(t2, 0.0)),
    }


def unstable_family_2d(nf: NormalForm2D, tol: float = LINE_TOL) -> str | None:
    """Unstable family of a normal form, or None for a stable one."""
    if nf.r1 == 0 and nf.r2 == 0:
        return ZERO
    if nf.r1 * nf.r2 == 0:
        return U_COLUMN
    d = _line_distances(nf.theta1, nf.theta2)
    if d[U_SUBSPACE] <= tol:
        return U_SUBSPACE
    if d[U_R0] <= tol:
        return U_R0
    return None


def line_proximity(nf: NormalForm2D) -> float:
    """Angular distance of a normal form to the nearest unstable line."""
    if nf.r1 * nf.r2 == 0:
        return 0.0
    return min(_line_distances(nf.theta1, nf.theta2).values())


# ---------------------------------------------------------------- cells and counts

@dataclass(frozen=True)
class CellCount:
    sector: Sector2D
    count: int
    index_sum: int


def _cell_counts(M: np.ndarray) -> list[CellCount]:
    from .analysis import index_at
    from .core import orthant_of

    out = []
    for sec in cells_2d(M):
        sols = solve_enumerate(M, sec.midpoint())
        if sols.is_continuum:
            raise UnstableMatrix("continuum of solutions at a cell midpoint")
        idx = 0
        for s in sols.isolated:
            idx += index_at(M, orthant_of(s.x))
        out.append(CellCount(sec, len(sols.isolated), idx))
    return out


def q_region_2d(M, tol: float = LINE_TOL) -> list[CellCount]:
    """Solution count and index sum for every cell of a stable 2x2 matrix."""
    M = as_matrix(M)
    if M.shape != (2, 2):
        raise DimensionUnsupported("q_region_2d needs a 2x2 matrix")
    if unstable_family_2d(normal_form_2d(M), tol) is not None:
        raise UnstableMatrix("cell counts are not locally constant for unstable matrices")
    return _cell_counts(M)


@dataclass(frozen=True)
class ClassLabel2D:
    label: str
    fingerprint: tuple[int, ...] = ()
    degree: int | None = None
    proximity: float | None = None

    @property
    def is_stable(self) -> bool:
        return self.label in STABLE_LABELS

    @property
    def near_unstable(self) -> bool:
        return self.proximity is not None and self.proximity < PROXIMITY_WARN

    def to_dict(self) -> dict:
        return {"label": self.label, "fingerprint": list(self.fingerprint),
                "degree": self.degree, "proximity": self.proximity}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassLabel2D":
        return cls(d["label"], tuple(d["fingerprint"]), d["degree"], d["proximity"])


# ---------------------------------------------------------------- classification

_DIAG = (-1.5 * math.pi, -0.5 * math.pi, 0.5 * math.pi, 1.5 * math.pi)
_AXIS = (0.5 * math.pi, 1.5 * math.pi)


def region_key(theta1: float, theta2: float) -> tuple[int, int, int]:
    """Which cell of the line arrangement in the open square contains (theta1, theta2).

    The unstable lines are theta_k in {pi/2, 3pi/2} and theta2 - theta1 in
    {+-pi/2, +-3pi/2}; each cell is an intersection of strips and
    therefore convex, so equal keys mean the same connected component.
    """
    b1 = sum(theta1 > c for c in _AXIS)
    b2 = sum(theta2 > c for c in _AXIS)
    bd = sum((theta2 - theta1) > c for c in _DIAG)
    return (int(b1), int(b2), int(bd))


def unstable_mask(theta1: np.ndarray, theta2: np.ndarray, width: float) -> np.ndarray:
    """Boolean grid of points within ``width`` of an unstable line (angles, same shape)."""
    h = 0.5 * math.pi

    def gap(a, b):
        d = np.mod(a - b, TWO_PI)
        return np.minimum(d, TWO_PI - d)

    m = np.zeros(np.shape(theta1), dtype=bool)
    for c in (0.0, h, 3 * h):
        m |= gap(theta1, c) < 0.5 * width
        m |= gap(theta2, c) < 0.5 * width
    for c in (h, -h):
        m |= gap(theta2, theta1 + c) < 0.5 * width
    return m


@dataclass
class FloodFill2D:
    """Connected stable components of the (theta1, theta2) square on a pixel grid."""

    resolution: int
    angles: np.ndarray
    labels: np.ndarray  # 0 on unstable pixels, 1..n_components elsewhere
    n_components: int
    keys: dict[int, tuple[int, int, int]] = field(default_factory=dict)

    def pixel(self, i: int, j: int) -> tuple[float, float]:
        return float(self.angles[i]), float(self.angles[j])

    def component_pixels(self, c: int) -> tuple[np.ndarray, np.ndarray]:
        return np.nonzero(self.labels == c)


def flood_fill_2d(resolution: int = 720) -> FloodFill2D:
    """Label the stable pixels of the square with 4-connectivity.

    Pixel centres sit at (i + 1/2) * 2pi / resolution; a pixel is unstable
    when an unstable line passes within half a pixel of its centre.
    """
    from scipy import ndimage

    step = TWO_PI / resolution
    t = (np.arange(resolution) + 0.5) * step
    T1, T2 = np.meshgrid(t, t, indexing="ij")
    mask = unstable_mask(T1, T2, step * (1 + 1e-9))
    labels, n = ndimage.label(~mask)
    keys = {}
    for c, sl in enumerate(ndimage.find_objects(labels), start=1):
        sub = labels[sl] == c
        i, j = np.argwhere(sub)[len(np.argwhere(sub)) // 2]
        keys[c] = region_key(t[sl[0].start + i], t[sl[1].start + j])
    return FloodFill2D(resolution, t, labels, n, keys)


@dataclass(frozen=True)
class ClassTable:
    """Stable region keys grouped into the five LCP-equivalence classes."""

    key_to_label: dict
    fingerprints: dict
    representatives: dict  # label -> (theta1, theta2)


def _key_points(resolution: int = 144) -> dict[tuple[int, int, int], list[tuple[float, float]]]:
    step = TWO_PI / resolution
    t = (np.arange(resolution) + 0.5) * step
    out: dict = {}
    for a in t:
        for b in t:
            nf = NormalForm2D(1, 1, float(a), float(b))
            if line_proximity(nf) < 0.5 * step:
                continue
            out.setdefault(region_key(a, b), []).append((float(a), float(b)))
    return out


@lru_cache(maxsize=1)
def class_table() -> ClassTable:
    """Group arrangement cells by the equivalences they are mapped into.

    Sample points of every cell are pushed through the index swap and the
    principal pivots on {1}, {2}, {1, 2}; cells hit by an image are
    merged (union-find).  Classes are named: C1 contains P-matrices, C3
    is the other class with no empty cell, and the remaining three are
    ordered by (how many classes share their sorted fingerprint, largest
    first; then least theta1, theta2 over their sample points) and named
    C2, C4, C5.
    """
    pts = _key_points()
    keys = sorted(pts)
    parent = {k: k for k in keys}

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for k in keys:
        sample = pts[k][:: max(1, len(pts[k]) // 12)]
        for a, b in sample:
            M = polar_matrix(a, b)
            images = [permute_conjugate(M, [1, 0])]
            for beta in ((0,), (1,), (0, 1)):
                try:
                    images.append(ppt(M, beta))
                except SingularPivotBlock:
                    pass
            for X in images:
                nf = normal_form_2d(X)
                if nf.r1 * nf.r2 == 0 or line_proximity(nf) < 1e-6:
                    continue
                kk = region_key(nf.theta1, nf.theta2)
                if kk in parent:
                    parent[find(kk)] = find(k)

    groups: dict = {}
    for k in keys:
        groups.setdefault(find(k), []).append(k)
    info = []
    for members in groups.values():
        a, b = pts[members[0]][len(pts[members[0]]) // 2]
        M = polar_matrix(a, b)
        fp = tuple(sorted(c.count for c in _cell_counts(M)))
        order = min(q for m in members for q in pts[m])
        info.append({"members": members, "fp": fp, "P": is_P(M), "Q": min(fp) > 0,
                     "rep": (a, b), "order": order})

    names: dict = {}
    P = [g for g in info if g["P"]]
    Q = [g for g in info if g["Q"] and not g["P"]]
    rest = [g for g in info if not g["Q"]]
    for g in P:
        names[id(g)] = "C1"
    for g in Q:
        names[id(g)] = "C3"
    shared = {g["fp"]: sum(h["fp"] == g["fp"] for h in rest) for g in rest}
    rest.sort(key=lambda g: (-shared[g["fp"]], g["order"]))
    for g, name in zip(rest, ("C2", "C4", "C5")):
        names[id(g)] = name
    key_to_label, fps, reps = {}, {}, {}
    for g in info:
        name = names.get(id(g), "C?")
        for m in g["members"]:
            key_to_label[m] = name
        fps[name] = g["fp"]
        reps[name] = g["rep"]
    return ClassTable(key_to_label, fps, reps)


def classify_2d(M, tol: float = LINE_TOL) -> ClassLabel2D:
    """Unstable family or stable class C1..C5 of a 2x2 matrix."""
    M = as_matrix(M)
    if M.shape != (2, 2):
        raise DimensionUnsupported(f"classify_2d needs a 2x2 matrix, got {M.shape}")
    nf = normal_form_2d(M)
    fam = unstable_family_2d(nf, tol)
    if fam is not None:
        return ClassLabel2D(fam, proximity=0.0)
    cc = _cell_counts(M)
    fp = tuple(sorted(c.count for c in cc))
    label = class_table().key_to_label[region_key(nf.theta1, nf.theta2)]
    return ClassLabel2D(label, fp, cc[0].index_sum, line_proximity(nf))
