"""Minimal deterministic SVG writer and the plots used by the CLI."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np


def _f(v: float) -> str:
    s = f"{float(v):.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


@dataclass
class SvgScene:
    """Layered primitives rendered in insertion order (layer by layer)."""

    width: int = 480
    height: int = 320
    layers: dict[str, list[str]] = field(default_factory=dict)

    def _add(self, layer: str, el: str) -> None:
        self.layers.setdefault(layer, []).append(el)

    def line(self, x1, y1, x2, y2, stroke="black", width=1.0, dash: str | None = None, layer="main"):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self._add(layer, f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
                         f'stroke="{stroke}" stroke-width="{_f(width)}"{d}/>')

    def polyline(self, pts, stroke="black", width=1.0, dash: str | None = None, layer="main"):
        if len(pts) == 0:
            return
        d = f' stroke-dasharray="{dash}"' if dash else ""
        p = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
        self._add(layer, f'<polyline points="{p}" fill="none" stroke="{stroke}" stroke-width="{_f(width)}"{d}/>')

    def polygon(self, pts, fill="#ddd", stroke="none", opacity=1.0, layer="main"):
        p = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
        self._add(layer, f'<polygon points="{p}" fill="{fill}" stroke="{stroke}" fill-opacity="{_f(opacity)}"/>')

    def rect(self, x, y, w, h, fill="#ddd", stroke="none", layer="main"):
        self._add(layer, f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" '
                         f'fill="{fill}" stroke="{stroke}"/>')

    def circle(self, x, y, r=2.0, fill="black", stroke="none", layer="main"):
        self._add(layer, f'<circle cx="{_f(x)}" cy="{_f(y)}" r="{_f(r)}" fill="{fill}" stroke="{stroke}"/>')

    def text(self, x, y, s: str, size=11, anchor="start", layer="labels"):
        self._add(layer, f'<text x="{_f(x)}" y="{_f(y)}" font-size="{size}" '
                         f'font-family="sans-serif" text-anchor="{anchor}">{escape(s)}</text>')

    def render(self) -> str:
        out = ['<?xml version="1.0" encoding="UTF-8"?>',
               f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" '
               f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">',
               f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="white"/>']
        for name, els in self.layers.items():
            out.append(f'<g id="{escape(name)}">')
            out.extend(els)
            out.append("</g>")
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.render())


class _Axes:
    def __init__(self, scene: SvgScene, box, xlim, ylim):
        self.s = scene
        self.x0, self.y0, self.w, self.h = box
        self.xlim = xlim if xlim[1] > xlim[0] else (xlim[0] - 1, xlim[1] + 1)
        self.ylim = ylim if ylim[1] > ylim[0] else (ylim[0] - 1, ylim[1] + 1)

    def X(self, x):
        a, b = self.xlim
        return self.x0 + (x - a) / (b - a) * self.w

    def Y(self, y):
        a, b = self.ylim
        return self.y0 + self.h - (y - a) / (b - a) * self.h

    def frame(self, xlabel="", ylabel=""):
        s = self.s
        s.rect(self.x0, self.y0, self.w, self.h, fill="none", stroke="black", layer="frame")
        for v in self.xlim:
            s.text(self.X(v), self.y0 + self.h + 14, _f(v), size=9, anchor="middle")
        for v in self.ylim:
            s.text(self.x0 - 4, self.Y(v) + 3, _f(v), size=9, anchor="end")
        if xlabel:
            s.text(self.x0 + self.w / 2, self.y0 + self.h + 28, xlabel, anchor="middle")
        if ylabel:
            s.text(self.x0, self.y0 - 6, ylabel)


def _count_value(c) -> float:
    return float("nan") if isinstance(c, str) else float(c)


def plot_sweep(diagram, title: str = "") -> SvgScene:
    """Count of solutions (top) and first solution coordinate per branch (bottom) vs lambda."""
    sc = SvgScene(520, 420)
    lam = np.array(diagram.parameter_grid, float)
    counts = [_count_value(c) for c in diagram.counts]
    finite = [c for c in counts if not math.isnan(c)]
    cmax = max(finite + [1.0]) + 1
    ax = _Axes(sc, (60, 30, 430, 130), (lam.min(), lam.max()), (0.0, cmax))
    ax.frame("", "number of solutions")
    pts = []
    for l, c in zip(lam, counts):
        if math.isnan(c):
            sc.circle(ax.X(l), ax.Y(cmax - 0.5), 2.5, fill="red")
        else:
            pts.append((ax.X(l), ax.Y(c)))
    sc.polyline(pts, stroke="black", width=1.5)
    xs = [x[0] for b in diagram.branches for x in b]
    lo, hi = (min(xs), max(xs)) if xs else (-1.0, 1.0)
    ax2 = _Axes(sc, (60, 220, 430, 150), (lam.min(), lam.max()), (lo, hi))
    ax2.frame("lambda", "x_1 of each solution")
    for seg in diagram.segments:
        sc.polyline([(ax2.X(lam[i]), ax2.Y(diagram.branches[i][j][0])) for i, j in seg], stroke="#1f4e9c")
    if title:
        sc.text(260, 16, title, size=12, anchor="middle")
    return sc


def plot_region(sweep, title: str = "") -> SvgScene:
    """Grey cells where the pivoted circuit LCP has three solutions."""
    sc = SvgScene(520, 400)
    R2, r = sweep.R2_grid, sweep.r_grid
    ax = _Axes(sc, (60, 30, 430, 320), (R2.min(), R2.max()), (r.min(), r.max()))
    dx = (R2.max() - R2.min()) / max(len(R2) - 1, 1)
    dy = (r.max() - r.min()) / max(len(r) - 1, 1)
    three = sweep.region(3)
    orig = sweep.region(3, "orig") if sweep.counts_orig[0, 0] is not None else None
    for i in range(len(R2)):
        for j in range(len(r)):
            x0, x1 = ax.X(R2[i] - dx / 2), ax.X(R2[i] + dx / 2)
            y0, y1 = ax.Y(r[j] + dy / 2), ax.Y(r[j] - dy / 2)
            if three[i, j]:
                sc.rect(x0, y0, x1 - x0, y1 - y0, fill="#999", layer="hat")
            if orig is not None and orig[i, j] != three[i, j]:
                sc.rect(x0, y0, x1 - x0, y1 - y0, fill="#d33", layer="orig")
    ax.frame("R2 [ohm]", "r [V]")
    if title:
        sc.text(260, 16, title, size=12, anchor="middle")
    return sc


def plot_trajectory(traj, title: str = "") -> SvgScene:
    n = traj.xi.shape[1]
    sc = SvgScene(560, 120 * (n + 1) + 40)
    t = traj.t
    series = [(traj.xi[:, k], f"xi_{k + 1}") for k in range(n)] + [(traj.r[:, 0], "r")]
    for row, (y, lab) in enumerate(series):
        lo, hi = float(np.min(y)), float(np.max(y))
        ax = _Axes(sc, (60, 20 + 120 * row, 470, 90), (t[0], t[-1]), (lo, hi))
        ax.frame("t [s]" if row == len(series) - 1 else "", lab)
        sc.polyline([(ax.X(a), ax.Y(b)) for a, b in zip(t, y)], stroke="black")
    if title:
        sc.text(280, 14, title, size=12, anchor="middle")
    return sc


def plot_cones_2d(M, title: str = "") -> SvgScene:
    """Rays I_1, I_2, -M_1, -M_2 on the unit circle; degenerate rays in red."""
    from .cones import rays_2d
    from .stability import degenerate_cones

    degenerate = {j for a in degenerate_cones(M) for j in a}
    sc = SvgScene(320, 320)
    cx, cy, R = 160, 160, 120
    sc.circle(cx, cy, R, fill="none", stroke="#888")
    for ang, labels in rays_2d(M):
        label = " ".join(("I_" if k == "I" else "-M_") + str(j + 1) for k, j in labels)
        colour = "red" if any(k == "M" and j in degenerate for k, j in labels) else "black"
        sc.line(cx, cy, cx + R * math.cos(ang), cy - R * math.sin(ang), stroke=colour, width=2)
        sc.text(cx + (R + 14) * math.cos(ang), cy - (R + 14) * math.sin(ang) + 4, label, anchor="middle")
    if title:
        sc.text(160, 14, title, size=12, anchor="middle")
    return sc
