"""Figure rendering from lmgquench CSVs: cycle, sweep and spectrum panels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .tables import classify, floats, read_table, require

LOG2 = math.log(2.0)

STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.25,
    "lines.linewidth": 1.3,
    "legend.framealpha": 0.9,
}

KINDS = ("cycle-panel", "sweep-panel", "spectrum-panel")


@dataclass(frozen=True)
class FigureSpec:
    inputs: tuple[str, ...]
    kind: str
    output: str
    log_energy: bool = True
    log_sweep_x: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise ValueError("no input CSVs given")


def _classified_inputs(spec: FigureSpec) -> dict[str, str]:
    by_kind = {}
    for path in spec.inputs:
        by_kind[classify(path)] = path
    return by_kind


def _distribution_axes(ax, x, p_init, p_final, xlabel, log_y):
    x = np.asarray(x)
    order = np.argsort(x)
    x, p_init, p_final = x[order], np.asarray(p_init)[order], np.asarray(p_final)[order]
    if log_y:
        positive = np.concatenate([p_init[p_init > 0], p_final[p_final > 0]])
        if len(positive) == 0:
            raise ValueError("distributions are identically zero")
        floor = positive.min() / 10.0
        ax.set_yscale("log")
        ax.fill_between(x, np.maximum(p_init, floor), floor,
                        color="crimson", alpha=0.45, label="initial")
        ax.plot(x, np.where(p_final > 0, p_final, np.nan),
                color="seagreen", label="final")
        ax.set_ylim(bottom=floor)
    else:
        ax.fill_between(x, p_init, 0.0, color="crimson", alpha=0.45, label="initial")
        ax.plot(x, p_final, color="seagreen", label="final")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("probability")
    ax.legend(loc="best")


def render_cycle_panel(spec: FigureSpec) -> plt.Figure:
    paths = _classified_inputs(spec)
    for needed in ("trace", "energy_dist", "jx_dist"):
        if needed not in paths:
            raise ValueError(f"cycle-panel needs a {needed} CSV among the inputs")
    trace = read_table(paths["trace"])
    t, lam, seg, jx = require(trace, paths["trace"], "t", "lambda", "segment", "jx")
    lam = np.asarray(floats(lam))
    jx = np.asarray(floats(jx))
    seg = np.asarray(seg)

    fig, axes = plt.subplots(3, 1, figsize=(6.0, 8.5))
    ax = axes[0]
    fwd = np.isin(seg, ("relax0", "forward"))
    bwd = ~fwd
    ax.plot(lam[fwd], jx[fwd], color="navy", label="forward")
    ax.plot(lam[bwd], jx[bwd], color="darkturquoise", alpha=0.8, label="backward")
    for mask, color, flip in ((seg == "forward", "navy", False),
                              (seg == "backward", "darkturquoise", True)):
        pts = np.nonzero(mask)[0]
        if len(pts) >= 2:
            mid = pts[len(pts) // 2]
            nxt = pts[min(len(pts) // 2 + max(len(pts) // 20, 1), len(pts) - 1)]
            ax.annotate("", xy=(lam[nxt], jx[nxt]), xytext=(lam[mid], jx[mid]),
                        arrowprops=dict(arrowstyle="-|>", color=color, lw=1.5))
    if "summary" in paths:
        summary = read_table(paths["summary"])
        lo, hi = require(summary, paths["summary"], "jx_band_lo", "jx_band_hi")
        lam0 = lam[seg == "relax0"][0]
        width = 0.03 * (lam.max() - lam.min() or 1.0)
        ax.fill_betweenx([float(lo[0]), float(hi[0])],
                         lam0 - width, lam0 + width,
                         color="grey", alpha=0.5, label="final band")
    ax.set_xlabel(r"$\Lambda(t)$")
    ax.set_ylabel(r"$\langle J_x \rangle$")
    ax.legend(loc="best")

    edist = read_table(paths["energy_dist"])
    energy, p0, pf = require(edist, paths["energy_dist"],
                             "energy", "p_initial", "p_final")
    _distribution_axes(axes[1], floats(energy), floats(p0), floats(pf),
                       "energy", spec.log_energy)

    jdist = read_table(paths["jx_dist"])
    jxv, q0, qf = require(jdist, paths["jx_dist"], "jx", "p_initial", "p_final")
    _distribution_axes(axes[2], floats(jxv), floats(q0), floats(qf),
                       r"$j_x$", False)
    fig.tight_layout()
    return fig


def render_sweep_panel(spec: FigureSpec) -> plt.Figure:
    paths = _classified_inputs(spec)
    if "sweep" not in paths:
        raise ValueError("sweep-panel needs the sweep CSV")
    table = read_table(paths["sweep"])
    ratio, ds, edis = require(table, paths["sweep"],
                              "tau_q_ratio", "delta_s", "e_dis_ratio")
    ratio, ds, edis = floats(ratio), floats(ds), floats(edis)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(ratio, ds, "s-", color="crimson", label=r"$\Delta S$")
    ax.plot(ratio, edis, "o-", color="black",
            label=r"$|\langle E_{dis}\rangle| / \langle E_{init}\rangle$")
    ax.axhline(LOG2, color="grey", linestyle="--", label=r"$\log 2$")
    if spec.log_sweep_x:
        ax.set_xscale("log")
    ax.set_xlabel(r"$\tau_q / \tau_s$")
    ax.legend(loc="best")
    fig.tight_layout()
    return fig


def render_spectrum_panel(spec: FigureSpec) -> plt.Figure:
    paths = _classified_inputs(spec)
    if "spectrum" not in paths:
        raise ValueError("spectrum-panel needs the spectrum CSV")
    table = read_table(paths["spectrum"])
    lam, sector, index, energy, e_c = require(
        table, paths["spectrum"], "lambda", "sector", "index", "energy", "e_c")
    lam = np.asarray(floats(lam))
    energy = np.asarray(floats(energy))
    e_c = np.asarray(floats(e_c))
    index = np.asarray([int(i) for i in index])
    sector = np.asarray(sector)
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for name, color in (("even", "steelblue"), ("odd", "darkorange")):
        mask = sector == name
        first = True
        for i in np.unique(index[mask]):
            line = mask & (index == i)
            order = np.argsort(lam[line])
            ax.plot(lam[line][order], energy[line][order], color=color,
                    lw=0.6, alpha=0.7, label=name if first else None)
            first = False
    order = np.argsort(lam)
    grid = np.unique(lam[order])
    ec_line = [e_c[lam == g][0] for g in grid]
    ax.plot(grid, ec_line, color="red", lw=2.2, label=r"$E_c = 2J^2/\Lambda$")
    ax.set_xlabel(r"$\Lambda$")
    ax.set_ylabel("energy")
    ax.legend(loc="best")
    fig.tight_layout()
    return fig


_RENDERERS = {
    "cycle-panel": render_cycle_panel,
    "sweep-panel": render_sweep_panel,
    "spectrum-panel": render_spectrum_panel,
}


def render(spec: FigureSpec) -> plt.Figure:
    """Render the requested panel and write spec.output; returns the figure."""
    with plt.rc_context(STYLE):
        fig = _RENDERERS[spec.kind](spec)
        fig.savefig(spec.output)
    return fig
