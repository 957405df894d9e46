"""lcp-atlas command line: solve, analyze, classify2d, sweep, circuit.

Exit codes: 0 ok, 2 input error, 3 numeric/solver error, 4 unsupported dimension.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Sequence

import numpy as np

from . import errors
from .analysis import degree, is_R0
from .core import CONTINUUM, LcpInstance, fmt_alpha, solve_enumerate, solve_lemke
from .equivalence import classify_2d
from .lcs import (
    CircuitParams,
    LcsModel,
    circuit_model,
    equilibria,
    gamma,
    piecewise_constant,
    simulate,
    sweep_1d,
    sweep_2d_circuit,
)
from .stability import stability_report
from .svg import plot_region, plot_sweep, plot_trajectory

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_DIM = 0, 2, 3, 4

SWEEP_HEADER_FIXED = ["lambda", "count", "continuum", "skeleton_distance", "boundary_flag", "singular_flag"]
SWEEP2D_HEADER = ["R2", "r", "count_hat", "count_original", "skeleton_distance", "gamma"]
CIRCUIT_INFO_HEADER = ["R2", "gamma"]


class InputError(Exception):
    pass


# ---------------------------------------------------------------- problem files

def load_problem(path: str) -> dict:
    """Read a JSON problem file; decoding errors carry line and column."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: cannot read file: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top level must be an object")
    kind = doc.get("kind")
    if kind not in ("lcp", "lcs", "circuit"):
        raise InputError(f"{path}: field 'kind' must be one of lcp, lcs, circuit (got {kind!r})")
    return doc


def _field(doc: dict, name: str):
    if name not in doc:
        raise InputError(f"missing field '{name}'")
    return doc[name]


def _array(doc: dict, name: str, ndim: int) -> np.ndarray:
    raw = _field(doc, name)
    try:
        a = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"field '{name}' is not a numeric array") from exc
    if a.ndim != ndim:
        raise InputError(f"field '{name}' must be a {ndim}-D array, got {a.ndim}-D")
    if not np.all(np.isfinite(a)):
        raise InputError(f"field '{name}' has non-finite entries")
    return a


def lcp_from_doc(doc: dict) -> LcpInstance:
    if doc["kind"] != "lcp":
        raise InputError(f"expected kind 'lcp', got {doc['kind']!r}")
    M = _array(doc, "M", 2)
    q = _array(doc, "q", 1)
    if M.shape[0] != M.shape[1]:
        raise InputError(f"field 'M' must be square, got {M.shape}")
    if q.shape[0] != M.shape[0]:
        raise InputError(f"field 'q' has length {q.shape[0]}, expected {M.shape[0]}")
    return LcpInstance(M, q)


def lcs_from_doc(doc: dict) -> tuple[LcsModel, np.ndarray, np.ndarray]:
    mats = [_array(doc, k, 2) for k in ("A", "B", "C", "D", "E1", "E2")]
    try:
        model = LcsModel(*mats)
    except errors.DimensionMismatch as exc:
        raise InputError(str(exc)) from exc
    return model, _array(doc, "r", 1), _array(doc, "s", 1)


def circuit_from_doc(doc: dict) -> CircuitParams:
    if doc["kind"] != "circuit":
        raise InputError(f"expected kind 'circuit', got {doc['kind']!r}")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise InputError("field 'params' must be an object")
    try:
        return CircuitParams.from_dict(params)
    except (TypeError, ValueError) as exc:
        raise InputError(f"field 'params': {exc}") from exc


def _floats(text: str, name: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise InputError(f"option {name}: expected comma-separated numbers, got {text!r}") from exc


def _grid(text: str, name: str) -> np.ndarray:
    parts = text.split(":")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except (IndexError, ValueError) as exc:
        raise InputError(f"option {name}: expected a:b:n, got {text!r}") from exc
    if n < 1:
        raise InputError(f"option {name}: n must be positive")
    return np.linspace(a, b, n)


def _write_csv(path: str | None, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_csv_cell(v) for v in row])
    text = buf.getvalue()
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _csv_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _vec(v) -> str:
    return "[" + ", ".join(f"{x:.10g}" for x in np.asarray(v, float)) + "]"


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


# ---------------------------------------------------------------- commands

def cmd_solve(args) -> int:
    doc = load_problem(args.file)
    if doc["kind"] == "lcs":
        model, r, s = lcs_from_doc(doc)
        eq = equilibria(model, r, s)
        if args.json:
            print(_dump(eq.to_dict()))
        else:
            print(f"equilibria: {eq.count}")
            for e in eq.isolated:
                print(f"  alpha={fmt_alpha(e.alpha)} xi={_vec(e.xi)} z={_vec(e.z)}")
        return EXIT_OK
    inst = lcp_from_doc(doc)
    tol = args.tol if args.tol is not None else doc.get("tol")
    if args.method == "lemke":
        res = solve_lemke(inst.M, inst.q, **({} if tol is None else {"tol": tol}))
        out = {"method": "lemke", "status": res.status, "pivots": res.pivots,
               "z": None if res.z is None else res.z.tolist()}
        if res.z is not None:
            out["w"] = (inst.M @ res.z + inst.q).tolist()
        if args.json:
            print(_dump(out))
        elif res.ok:
            print(f"lemke: solution after {res.pivots} pivots")
            print(f"  z={_vec(res.z)} w={_vec(out['w'])}")
        else:
            print(f"lemke: secondary ray after {res.pivots} pivots")
        return EXIT_OK
    sols = solve_enumerate(inst.M, inst.q, tol=tol)
    if args.json:
        print(_dump(sols.to_dict()))
        return EXIT_OK
    print(f"solutions: {sols.count}")
    for s in sols.isolated:
        print(f"  alpha={fmt_alpha(s.alpha)} z={_vec(s.z)} x={_vec(s.x)} w={_vec(s.w)}")
    for f in sols.degenerate:
        line = f"  continuum alpha={fmt_alpha(f.alpha)} x0={_vec(f.particular_x)}"
        line += " directions=" + ", ".join(_vec(g) for g in f.nullspace_generators)
        if f.endpoints:
            line += " z-range=" + " .. ".join(_vec(np.maximum(-e, 0)) for e in f.endpoints)
        print(line)
    return EXIT_OK


def cmd_analyze(args) -> int:
    inst = lcp_from_doc(load_problem(args.file))
    M = inst.M
    r0 = is_R0(M)
    rep = stability_report(M)
    deg = None
    if r0 and (args.degree or not args.margin):
        deg = degree(M, seed=args.seed, check_r0=False)
    if args.json:
        out = {"R0": bool(r0), "R0_witness": None if r0 else {"alpha": list(r0.alpha), "p": r0.p.tolist()},
               "stability": rep.to_dict(), "degree": None if deg is None else deg.to_dict()}
        print(_dump(out))
        return EXIT_OK
    print(f"R0: {'yes' if r0 else 'no'}" + ("" if r0 else f" (kernel witness on alpha={fmt_alpha(r0.alpha)})"))
    print("degenerate cones: " + (", ".join(fmt_alpha(a) for a in rep.degenerate_alphas) or "none"))
    am = rep.margin_argmin
    if am is not None:
        where = am.facet.describe() if am.facet is not None else f"span alpha={fmt_alpha(am.alpha)}"
        print(f"margin attained: set {am.set}, k={am.k + 1}, {where}")
    parts = []
    if rep.weak_witness is not None:
        parts.append(f"weakly degenerate: {rep.weak_witness.describe()}")
    parts.append("STABLE" if rep.is_stable else "UNSTABLE")
    parts.append(f"margin {_fmt_margin(rep.margin)}")
    if deg is not None:
        parts.append(f"degree {deg.degree}")
    print("; ".join(parts))
    return EXIT_OK


def _fmt_margin(v: float) -> str:
    return "0" if v == 0.0 else repr(round(float(v), 12))


def cmd_classify2d(args) -> int:
    inst = lcp_from_doc(load_problem(args.file))
    lab = classify_2d(inst.M)
    if args.json:
        print(_dump(lab.to_dict()))
        return EXIT_OK
    print(lab.label)
    if lab.fingerprint:
        print("cell counts: " + ", ".join(str(c) for c in lab.fingerprint))
    if lab.degree is not None:
        print(f"degree: {lab.degree}")
    if lab.near_unstable:
        print(f"warning: within {lab.proximity:.2e} rad of an unstable line")
    return EXIT_OK


def cmd_sweep(args) -> int:
    doc = load_problem(args.file)
    inst = lcp_from_doc(doc)
    n = inst.n
    q0 = _floats(args.q0, "--q0") if args.q0 else inst.q
    if args.dir is None:
        raise InputError("option --dir is required")
    d = _floats(args.dir, "--dir")
    if len(q0) != n or len(d) != n:
        raise InputError(f"--q0 and --dir need {n} components")
    lams = _grid(args.lam, "--lambda")
    diag = sweep_1d(inst.M, q0, d, lams)
    rows = []
    for lam, xs, fl in zip(diag.parameter_grid, diag.branches, diag.flags):
        rows.append([lam, fl["count"], fl["continuum"], fl["skeleton_proximity"],
                     any(s.on_orthant_boundary for s in fl["singularity"]),
                     any(s.singular_piece is not None for s in fl["singularity"])])
    if args.json:
        print(_dump(diag.to_dict()))
    else:
        text = _write_csv(args.out, SWEEP_HEADER_FIXED, rows)
        if not args.out:
            sys.stdout.write(text)
    if args.svg:
        plot_sweep(diag, doc.get("name", "")).save(args.svg)
    return EXIT_OK


def cmd_circuit(args) -> int:
    p = circuit_from_doc(load_problem(args.file))
    if args.R2_value is not None:
        p = p.with_(R2=args.R2_value)
    if args.action == "info":
        grid = _grid(args.R2_grid, "--R2-grid")
        vals = [gamma(p.with_(R2=float(R))) for R in grid]
        rows = [[R, g] for R, g in zip(grid, vals)]
        if args.json:
            print(_dump({"R2": grid.tolist(), "gamma": vals, "bracket": _bracket(grid, vals)}))
            return EXIT_OK
        sys.stdout.write(_write_csv(None, CIRCUIT_INFO_HEADER, rows))
        br = _bracket(grid, vals)
        print("gamma sign change: " + (f"R2 in [{br[0]:.6g}, {br[1]:.6g}]" if br else "none on grid"))
        return EXIT_OK
    if args.action == "equilibria":
        model = circuit_model(p)
        eq = equilibria(model, [p.r if args.r is None else args.r], [p.s])
        if args.json:
            print(_dump(eq.to_dict()))
        else:
            print(f"equilibria: {eq.count}")
            for e in eq.isolated:
                print(f"  xi={_vec(e.xi)} z={_vec(e.z)}")
        return EXIT_OK
    if args.action == "sweep2d":
        R2s = _grid(args.R2_grid, "--R2-grid")
        rs = _grid(args.r_grid, "--r-grid")
        sw = sweep_2d_circuit(p, R2s, rs)
        rows = []
        for i, R in enumerate(R2s):
            for j, r in enumerate(rs):
                rows.append([R, r, sw.counts_hat[i, j], sw.counts_orig[i, j], sw.skeleton_proximity[i, j], sw.gamma[i]])
        if args.json:
            print(_dump(sw.to_diagram().to_dict()))
        else:
            text = _write_csv(args.out, SWEEP2D_HEADER, rows)
            if not args.out:
                sys.stdout.write(text)
        if args.svg:
            plot_region(sw, "three-solution region").save(args.svg)
        return EXIT_OK
    if args.action == "simulate":
        model = circuit_model(p)
        xi0 = _floats(args.xi0, "--xi0") if args.xi0 else np.zeros(4)
        if len(xi0) != 4:
            raise InputError("--xi0 needs 4 components")
        pieces = _schedule(args.schedule) if args.schedule else [(0.0, p.r)]
        traj = simulate(model, xi0, piecewise_constant(pieces), [p.s], dt=args.dt, T=args.T,
                        record_every=args.record_every)
        header = ["t", "xi_1", "xi_2", "xi_3", "xi_4", "z_1", "z_2", "z_3", "z_4", "r"]
        rows = [[t, *x, *z, rr[0]] for t, x, z, rr in zip(traj.t, traj.xi, traj.z, traj.r)]
        if args.json:
            print(_dump(traj.to_dict()))
        else:
            text = _write_csv(args.out, header, rows)
            if not args.out:
                sys.stdout.write(text)
        if args.svg:
            plot_trajectory(traj, "circuit trajectory").save(args.svg)
        return EXIT_OK
    raise InputError(f"unknown circuit action {args.action!r}")


def _bracket(grid, vals):
    for a, b, ga, gb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if ga == 0 or np.sign(ga) != np.sign(gb):
            return [float(a), float(b)]
    return None


def _schedule(text: str) -> list[tuple[float, float]]:
    out = []
    for part in text.split(","):
        try:
            t, r = part.split(":")
            out.append((float(t), float(r)))
        except ValueError as exc:
            raise InputError(f"option --schedule: expected t:r pairs, got {part!r}") from exc
    return out


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lcp-atlas", description="Geometric analysis of linear complementarity problems.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve an LCP (or the equilibrium LCP of an LCS)")
    p.add_argument("file")
    p.add_argument("--tol", type=float)
    p.add_argument("--method", choices=["enumerate", "lemke"], default="enumerate")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("analyze", help="R0, degeneracy, stability, margin and degree")
    p.add_argument("file")
    p.add_argument("--margin", action="store_true", help="report only stability and margin")
    p.add_argument("--degree", action="store_true", help="also compute the degree")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("classify2d", help="classify a 2x2 matrix")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_classify2d)

    p = sub.add_parser("sweep", help="one-parameter sweep q0 + lambda * dir")
    p.add_argument("file")
    p.add_argument("--q0")
    p.add_argument("--dir")
    p.add_argument("--lambda", dest="lam", default="-1:1:201")
    p.add_argument("--out")
    p.add_argument("--svg")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("circuit", help="transistor network: info, equilibria, sweep2d, simulate")
    p.add_argument("file")
    p.add_argument("action", choices=["info", "equilibria", "sweep2d", "simulate"])
    p.add_argument("--R2", dest="R2_value", type=float)
    p.add_argument("--R2-grid", default="1:1000:40")
    p.add_argument("--r-grid", default="0.6:2.1:50")
    p.add_argument("--r", type=float)
    p.add_argument("--xi0")
    p.add_argument("--schedule", help="piecewise-constant r as t0:r0,t1:r1,...")
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--record-every", type=int, default=10)
    p.add_argument("--out")
    p.add_argument("--svg")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_circuit)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (errors.DimensionUnsupported, errors.DimensionExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIM
    except (errors.DimensionMismatch, errors.InvalidParameter, errors.NonpositiveScale) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (errors.LcpError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
