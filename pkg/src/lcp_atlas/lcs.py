"""Linear complementarity systems: equilibria, vector field, simulation, sweeps, circuit."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .analysis import SingularityFlags, is_P, singularity_flags
from .cones import skeleton_distance
from .core import CONTINUUM, as_matrix, as_vector, is_singular, solve_enumerate
from .errors import DimensionMismatch, InvalidParameter, NotPMatrix, SingularA, SingularB


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("LCP_ATLAS_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    n = thread_count()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------- model

@dataclass(frozen=True)
class LcsModel:
    """xi' = A xi + B z + E1 r,  w = C xi + D z + E2 s,  0 <= z perp w >= 0."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E1: np.ndarray
    E2: np.ndarray

    def __post_init__(self):
        mats = {}
        for name in ("A", "B", "C", "D", "E1", "E2"):
            v = np.array(getattr(self, name), dtype=float)
            if v.ndim == 1:
                v = v.reshape(-1, 1)
            mats[name] = v
            object.__setattr__(self, name, v)
        n, m, l = mats["A"].shape[0], mats["D"].shape[0], mats["E1"].shape[1]
        expect = {"A": (n, n), "B": (n, m), "C": (m, n), "D": (m, m), "E1": (n, l), "E2": (m, mats["E2"].shape[1])}
        for name, shape in expect.items():
            if mats[name].shape != shape:
                raise DimensionMismatch(f"{name} has shape {mats[name].shape}, expected {shape}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.D.shape[0]

    @property
    def l(self) -> int:
        return self.E1.shape[1]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("A", "B", "C", "D", "E1", "E2")}

    @classmethod
    def from_dict(cls, d: dict) -> "LcsModel":
        return cls(*(np.array(d[k], float) for k in ("A", "B", "C", "D", "E1", "E2")))


def _A_inverse_apply(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    if is_singular(A):
        raise SingularA("A is singular")
    return np.linalg.solve(A, X)


def lcp_data(model: LcsModel, r, s) -> tuple[np.ndarray, np.ndarray]:
    """Equilibrium LCP: M = D - C A^-1 B and q = E2 s - C A^-1 E1 r."""
    r = as_vector(r, model.E1.shape[1])
    s = as_vector(s, model.E2.shape[1])
    AiB = _A_inverse_apply(model.A, model.B)
    AiE = _A_inverse_apply(model.A, model.E1 @ r)
    return model.D - model.C @ AiB, model.E2 @ s - model.C @ AiE


# ---------------------------------------------------------------- P-matrix LCP

def solve_p_lcp(D: np.ndarray, v: np.ndarray, tol: float = 1e-12, max_iter: int | None = None) -> np.ndarray:
    """Unique z of lcp(D, v) for a P-matrix D.

    Positive diagonal D has the closed form z = [-v / d]^+; otherwise
    Murty's least-index principal pivoting is used, which terminates for
    every P-matrix.
    """
    m = D.shape[0]
    off = D - np.diag(np.diag(D))
    if not off.any():
        return np.maximum(-v / np.diag(D), 0.0)
    basic = np.zeros(m, dtype=bool)
    if max_iter is None:
        max_iter = 2 ** min(m, 20) + 10
    scale = tol * (1.0 + np.abs(v).max())
    for _ in range(max_iter):
        z = np.zeros(m)
        b = np.flatnonzero(basic)
        if b.size:
            z[b] = np.linalg.solve(D[np.ix_(b, b)], -v[b])
        w = D @ z + v
        bad = np.flatnonzero((basic & (z < -scale)) | (~basic & (w < -scale)))
        if bad.size == 0:
            return np.maximum(z, 0.0)
        basic[bad[0]] = ~basic[bad[0]]
    raise RuntimeError("principal pivoting did not terminate")


def _require_P(D: np.ndarray) -> None:
    if not is_P(D):
        raise NotPMatrix("D must be a P-matrix")


def fD_inverse(D, v, check: bool = True) -> np.ndarray:
    """x with f_D(x) = v, via the unique solution z of lcp(D, v)."""
    D = as_matrix(D)
    v = as_vector(v, D.shape[0])
    if check:
        _require_P(D)
    z = solve_p_lcp(D, v)
    return (D - np.eye(D.shape[0])) @ z + v


def vector_field(model: LcsModel, xi, r, s, check: bool = True) -> np.ndarray:
    """F(xi) = A xi + B z(xi) + E1 r with z the unique LCP solution at the port."""
    xi = as_vector(xi, model.n)
    r = as_vector(r, model.l)
    s = as_vector(s, model.E2.shape[1])
    if check:
        _require_P(model.D)
    z = solve_p_lcp(model.D, model.C @ xi + model.E2 @ s)
    return model.A @ xi + model.B @ z + model.E1 @ r


# ---------------------------------------------------------------- equilibria

@dataclass(frozen=True)
class Equilibrium:
    xi: np.ndarray
    x: np.ndarray
    z: np.ndarray
    alpha: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {"xi": self.xi.tolist(), "x": self.x.tolist(), "z": self.z.tolist(), "alpha": list(self.alpha)}

    @classmethod
    def from_dict(cls, d: dict) -> "Equilibrium":
        return cls(np.array(d["xi"], float), np.array(d["x"], float), np.array(d["z"], float), tuple(d["alpha"]))


@dataclass
class EquilibriumSet:
    isolated: list[Equilibrium] = field(default_factory=list)
    continuum_witnesses: list[Equilibrium] = field(default_factory=list)

    @property
    def count(self) -> int | str:
        return CONTINUUM if self.continuum_witnesses else len(self.isolated)

    def to_dict(self) -> dict:
        return {"count": self.count, "isolated": [e.to_dict() for e in self.isolated],
                "continuum_witnesses": [e.to_dict() for e in self.continuum_witnesses]}

    @classmethod
    def from_dict(cls, d: dict) -> "EquilibriumSet":
        return cls([Equilibrium.from_dict(e) for e in d["isolated"]],
                   [Equilibrium.from_dict(e) for e in d["continuum_witnesses"]])


def xi_from_x(model: LcsModel, x, r) -> np.ndarray:
    """Xi(x, r) = -A^-1 (B [-x]^+ + E1 r)."""
    z = np.maximum(-np.asarray(x, float), 0.0)
    return -_A_inverse_apply(model.A, model.B @ z + model.E1 @ as_vector(r, model.l))


def equilibria(model: LcsModel, r, s) -> EquilibriumSet:
    """All equilibria, from the solutions of the equilibrium LCP."""
    _require_P(model.D)
    M, q = lcp_data(model, r, s)
    sols = solve_enumerate(M, q)
    out = EquilibriumSet()
    for sol in sols.isolated:
        out.isolated.append(Equilibrium(xi_from_x(model, sol.x, r), sol.x, sol.z, sol.alpha))
    for fam in sols.degenerate:
        x = fam.particular_x
        out.continuum_witnesses.append(Equilibrium(xi_from_x(model, x, r), x, fam.particular_z, fam.alpha))
    return out


# ---------------------------------------------------------------- simulation

@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    xi: np.ndarray  # (len(t), n)
    z: np.ndarray  # (len(t), m)
    r: np.ndarray  # (len(t), l)

    def to_dict(self) -> dict:
        return {"t": self.t.tolist(), "xi": self.xi.tolist(), "z": self.z.tolist(), "r": self.r.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(*(np.array(d[k], float) for k in ("t", "xi", "z", "r")))


RSchedule = Callable[[float], np.ndarray] | Sequence[tuple[float, object]]


def piecewise_constant(pieces: Sequence[tuple[float, object]]) -> Callable[[float], np.ndarray]:
    """r(t) from [(t0, r0), (t1, r1), ...]: value r_i on [t_i, t_{i+1})."""
    starts = np.array([p[0] for p in pieces], float)
    vals = [np.atleast_1d(np.asarray(p[1], float)) for p in pieces]
    if len(starts) == 0 or np.any(np.diff(starts) <= 0):
        raise InvalidParameter("schedule start times must be strictly increasing")

    def r_of(t: float) -> np.ndarray:
        i = int(np.searchsorted(starts, t, side="right")) - 1
        return vals[max(i, 0)]

    return r_of


def simulate(model: LcsModel, xi0, r_schedule: RSchedule, s, dt: float = 1e-4, T: float = 1.0,
             record_every: int = 1) -> Trajectory:
    """Fixed-step RK4 on the explicit vector field; r is held constant over each step."""
    if dt <= 0 or T <= 0:
        raise InvalidParameter("dt and T must be positive")
    _require_P(model.D)
    r_of = r_schedule if callable(r_schedule) else piecewise_constant(r_schedule)
    s = as_vector(s, model.E2.shape[1])
    A, B, C, D, E1 = model.A, model.B, model.C, model.D, model.E1
    port = model.E2 @ s
    xi = as_vector(xi0, model.n).copy()
    steps = int(round(T / dt))

    def F(x, e1r):
        return A @ x + B @ solve_p_lcp(D, C @ x + port) + e1r

    ts, xs, zs, rs = [], [], [], []
    for k in range(steps + 1):
        t = k * dt
        r = as_vector(r_of(t), model.l)
        if k % record_every == 0 or k == steps:
            ts.append(t)
            xs.append(xi.copy())
            zs.append(solve_p_lcp(D, C @ xi + port))
            rs.append(r)
        if k == steps:
            break
        e1r = E1 @ r
        k1 = F(xi, e1r)
        k2 = F(xi + 0.5 * dt * k1, e1r)
        k3 = F(xi + 0.5 * dt * k2, e1r)
        k4 = F(xi + dt * k3, e1r)
        xi = xi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return Trajectory(np.array(ts), np.array(xs), np.array(zs), np.array(rs))


# ---------------------------------------------------------------- sweeps

@dataclass
class BifurcationDiagram:
    """Solutions sampled on a parameter grid.

    ``branches[i]`` lists the isolated solutions x at grid point i;
    ``flags[i]`` holds count, continuum, skeleton proximity and the
    per-solution singularity flags.  ``segments`` are stitched branches:
    lists of (grid index, solution index) pairs.
    """

    parameter_grid: list
    branches: list[list[np.ndarray]]
    flags: list[dict]
    segments: list[list[tuple[int, int]]] = field(default_factory=list)

    @property
    def counts(self) -> list:
        return [f["count"] for f in self.flags]

    def to_dict(self) -> dict:
        return {
            "parameter_grid": [list(p) if isinstance(p, (tuple, list)) else p for p in self.parameter_grid],
            "branches": [[x.tolist() for x in b] for b in self.branches],
            "flags": [{**f, "singularity": [s.to_dict() for s in f.get("singularity", [])]} for f in self.flags],
            "segments": [[list(p) for p in seg] for seg in self.segments],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BifurcationDiagram":
        grid = [tuple(p) if isinstance(p, list) else p for p in d["parameter_grid"]]
        flags = [{**f, "singularity": [SingularityFlags.from_dict(s) for s in f.get("singularity", [])]}
                 for f in d["flags"]]
        return cls(grid, [[np.array(x, float) for x in b] for b in d["branches"]], flags,
                   [[tuple(p) for p in seg] for seg in d["segments"]])


def _stitch(grid: np.ndarray, qs: list[np.ndarray], branches: list[list[np.ndarray]], M: np.ndarray):
    cond = np.linalg.cond(M) if np.all(np.isfinite(M)) else 1e12
    cond = min(cond, 1e12)
    segments: list[list[tuple[int, int]]] = []
    open_ends: dict[int, int] = {}  # solution index at previous point -> segment id
    for i, sols in enumerate(branches):
        new_open: dict[int, int] = {}
        if i > 0:
            cap = 10.0 * np.linalg.norm(qs[i] - qs[i - 1]) * max(1.0, cond)
            prev = branches[i - 1]
            pairs = sorted(((np.linalg.norm(x - y), a, b) for a, y in enumerate(prev) for b, x in enumerate(sols)))
            used_a, used_b = set(), set()
            for d, a, b in pairs:
                if d > cap or a in used_a or b in used_b or a not in open_ends:
                    continue
                used_a.add(a)
                used_b.add(b)
                seg = open_ends[a]
                segments[seg].append((i, b))
                new_open[b] = seg
        for b in range(len(sols)):
            if b not in new_open:
                segments.append([(i, b)])
                new_open[b] = len(segments) - 1
        open_ends = new_open
    return segments


def sweep_1d(M, q0, direction, lambdas) -> BifurcationDiagram:
    """Solve lcp(M, q0 + lambda * direction) along a grid of lambda."""
    M = as_matrix(M)
    n = M.shape[0]
    q0 = as_vector(q0, n)
    direction = as_vector(direction, n)
    if not np.any(direction):
        raise InvalidParameter("sweep direction must be nonzero")
    grid = [float(l) for l in lambdas]
    qs = [q0 + l * direction for l in grid]

    def point(q):
        sols = solve_enumerate(M, q)
        xs = [s.x for s in sols.isolated]
        flags = {
            "count": sols.count,
            "continuum": sols.is_continuum,
            "skeleton_proximity": skeleton_distance(M, q),
            "singularity": [singularity_flags(M, x) for x in xs],
        }
        return xs, flags

    res = _map(point, qs)
    branches = [r[0] for r in res]
    flags = [r[1] for r in res]
    return BifurcationDiagram(grid, branches, flags, _stitch(np.array(grid), qs, branches, M))


# ---------------------------------------------------------------- circuit

@dataclass(frozen=True)
class CircuitParams:
    """Resistances in ohms, capacitances in farads, gains in (0, 1), s and r in volts.

    R_R and R_F are the Ebers-Moll junction resistances; they only enter D.
    """

    R0a: float = 100.0
    R1a: float = 2200.0
    R2a: float = 100.0
    R0b: float = 100.0
    R1b: float = 100.0
    R2b: float = 10000.0
    R1: float = 10.0
    R2: float = 500.0
    C1a: float = 100e-6
    C2a: float = 100e-6
    C1b: float = 100e-6
    C2b: float = 100e-6
    alphaF: float = 0.99
    alphaR: float = 0.5
    RR: float = 1.0
    RF: float = 1.0
    s: float = 0.7
    r: float = 0.0

    def __post_init__(self):
        for name in ("R0a", "R1a", "R2a", "R0b", "R1b", "R2b", "R1", "R2", "RR", "RF"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise InvalidParameter(f"{name} must be a positive resistance, got {v}")
        for name in ("C1a", "C2a", "C1b", "C2b"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise InvalidParameter(f"{name} must be a positive capacitance, got {v}")
        for name in ("alphaF", "alphaR"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise InvalidParameter(f"{name} must lie in (0, 1), got {v}")

    def with_(self, **kw) -> "CircuitParams":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "CircuitParams":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidParameter(f"unknown circuit parameter(s): {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})

    @property
    def G(self) -> dict[str, float]:
        return {k: 1.0 / getattr(self, "R" + k) for k in ("0a", "1a", "2a", "0b", "1b", "2b", "1", "2")}


def _T(p: CircuitParams) -> np.ndarray:
    return np.array([[-1.0 / p.alphaR, 1.0], [1.0, -1.0 / p.alphaF]])


def _circuit_blocks(p: CircuitParams) -> np.ndarray:
    G = p.G
    g0a, g1a, g2a, g0b, g1b, g2b, g1, g2 = (G[k] for k in ("0a", "1a", "2a", "0b", "1b", "2b", "1", "2"))
    A11 = np.array([[-(g0a + g2a + g2), g2a + g2], [g2a + g2, -(g1a + g2a + g1 + g2)]])
    A22 = np.array([[-(g0b + g2b + g1), g2b + g1], [g2b + g1, -(g1b + g2b + g1 + g2)]])
    A12 = np.array([[0.0, g2], [g1, -(g1 + g2)]])
    return np.block([[A11, A12], [A12.T, A22]])


def circuit_model(p: CircuitParams) -> LcsModel:
    """The four-state transistor network as an LCS (r and s are scalar inputs)."""
    G = p.G
    Q = np.diag([1.0 / p.C1a, 1.0 / p.C2a, 1.0 / p.C1b, 1.0 / p.C2b])
    T = _T(p)
    Z = np.zeros((2, 2))
    A = Q @ _circuit_blocks(p)
    B = Q @ np.block([[T, Z], [Z, T]])
    E1 = Q @ np.array([[-G["2"]], [G["1"] + G["2"]], [-G["1"]], [G["1"] + G["2"]]])
    E2 = np.ones((4, 1))
    C = -np.eye(4)
    D = np.diag([p.RR / p.alphaR, p.RF / p.alphaF, p.RR / p.alphaR, p.RF / p.alphaF])
    return LcsModel(A, B, C, D, E1, E2)


def circuit_Mhat(p: CircuitParams) -> np.ndarray:
    """M_hat = -B^-1 A C^-1, the pivot of N = -C A^-1 B on all indices."""
    model = circuit_model(p)
    if is_singular(model.B):
        raise SingularB("B is singular")
    return -np.linalg.solve(model.B, model.A @ np.linalg.inv(model.C))


def circuit_Mhat_entries(p: CircuitParams) -> np.ndarray:
    """The explicit entrywise expressions for the pivoted circuit matrix.

    These entries equal adj(T)-blocks times the conductance matrix, i.e.
    det(T) * circuit_Mhat(p), where det(T) = (1 - aR aF) / (aR aF) > 0.
    """
    G = p.G
    g0a, g1a, g2a, g0b, g1b, g2b, g1, g2 = (G[k] for k in ("0a", "1a", "2a", "0b", "1b", "2b", "1", "2"))
    aF, aR = p.alphaF, p.alphaR
    M11 = np.array([
        [(g0a + (1 - aF) * (g2a + g2)) / aF, (aF * (g1a + g1) - (1 - aF) * (g2a + g2)) / aF],
        [(aR * g0a - (1 - aR) * (g2a + g2)) / aR, (g1a + g1 + (1 - aR) * (g2a + g2)) / aR],
    ])
    M12 = np.array([
        [-g1, (aF * g1 - (1 - aF) * g2) / aF],
        [-g1 / aR, (g1 + (1 - aR) * g2) / aR],
    ])
    M21 = np.array([
        [-g2, (aF * g2 - (1 - aF) * g1) / aF],
        [-g2 / aR, (g2 + (1 - aR) * g1) / aR],
    ])
    M22 = np.array([
        [(g0b + (1 - aF) * (g2b + g1)) / aF, (aF * (g1b + g2) - (1 - aF) * (g2b + g1)) / aF],
        [(aR * g0b - (1 - aR) * (g2b + g1)) / aR, (g1b + g2 + (1 - aR) * (g2b + g1)) / aR],
    ])
    return np.block([[M11, M12], [M21, M22]])


def transistor_det(p: CircuitParams) -> float:
    """det T = (1 - aR aF) / (aR aF)."""
    return (1.0 - p.alphaR * p.alphaF) / (p.alphaR * p.alphaF)


def circuit_qhat(p: CircuitParams, r: float | None = None, s: float | None = None) -> np.ndarray:
    """q_hat = B^-1 (A C^-1 E2 s - E1 r)."""
    model = circuit_model(p)
    r = p.r if r is None else r
    s = p.s if s is None else s
    if is_singular(model.B):
        raise SingularB("B is singular")
    rhs = model.A @ np.linalg.solve(model.C, model.E2[:, 0] * s) - model.E1[:, 0] * r
    return np.linalg.solve(model.B, rhs)


def gamma(p: CircuitParams) -> float:
    """Sign-deciding combination of conductances for the {1,3} principal minor."""
    G = p.G
    g0a, g2a, g0b, g2b, g1, g2 = G["0a"], G["2a"], G["0b"], G["2b"], G["1"], G["2"]
    aF = p.alphaF
    c = 1.0 - aF
    return (g0a * g0b + c * (g0a * g2b + g0b * g2a + c * g2a * g2b)
            + c * (g0a + c * g2a) * g1
            - ((2 * aF - 1) * g1 - c * (g0b + c * g2b)) * g2)


@dataclass
class CircuitSweep:
    """(R2, r) grid with solution counts of the pivoted and the original LCP."""

    R2_grid: np.ndarray
    r_grid: np.ndarray
    counts_hat: np.ndarray  # object array: int or CONTINUUM
    counts_orig: np.ndarray
    skeleton_proximity: np.ndarray
    gamma: np.ndarray

    def region(self, value=3, which: str = "hat") -> np.ndarray:
        c = self.counts_hat if which == "hat" else self.counts_orig
        return np.vectorize(lambda v: v == value)(c).astype(bool)

    def to_diagram(self) -> BifurcationDiagram:
        grid, flags = [], []
        for i, R2 in enumerate(self.R2_grid):
            for j, r in enumerate(self.r_grid):
                grid.append((float(R2), float(r)))
                flags.append({"count": self.counts_hat[i, j], "count_original": self.counts_orig[i, j],
                              "continuum": self.counts_hat[i, j] == CONTINUUM,
                              "skeleton_proximity": float(self.skeleton_proximity[i, j]),
                              "singularity": []})
        return BifurcationDiagram(grid, [[] for _ in grid], flags)


def sweep_2d_circuit(p: CircuitParams, R2_grid, r_grid, original: bool = True) -> CircuitSweep:
    R2_grid = np.asarray(R2_grid, float)
    r_grid = np.asarray(r_grid, float)
    if R2_grid.size == 0 or r_grid.size == 0:
        raise InvalidParameter("grids must be nonempty")

    def column(R2):
        pp = p.with_(R2=float(R2))
        Mh = circuit_Mhat(pp)
        model = circuit_model(pp)
        ch, co, prox = [], [], []
        for r in r_grid:
            qh = circuit_qhat(pp, r)
            ch.append(solve_enumerate(Mh, qh).count)
            prox.append(skeleton_distance(Mh, qh))
            if original:
                M, q = lcp_data(model, [r], [pp.s])
                co.append(solve_enumerate(M, q).count)
            else:
                co.append(None)
        return ch, co, prox, gamma(pp)

    cols = _map(column, R2_grid)
    ch = np.empty((len(R2_grid), len(r_grid)), dtype=object)
    co = np.empty_like(ch)
    prox = np.zeros(ch.shape)
    g = np.zeros(len(R2_grid))
    for i, (a, b, c, gg) in enumerate(cols):
        ch[i, :] = a
        co[i, :] = b
        prox[i, :] = c
        g[i] = gg
    return CircuitSweep(R2_grid, r_grid, ch, co, prox, g)
