"""Deterministic rendering of the three figure kinds.

Output is byte-stable across runs: fixed style, fixed SVG hash salt, and no
timestamps in the image metadata.  Probability color scales are pinned to
[0, 1] so panels are comparable.
"""

import math

import matplotlib
matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .spec import REQUIRED_COLUMNS, FigureSpec, SpecError

matplotlib.rcParams["svg.hashsalt"] = "matmed-figures"

_PNG_METADATA = {"Software": "matmed-figures"}
_SVG_METADATA = {"Date": None, "Creator": "matmed-figures"}


def _read_panel(path, kind) -> pd.DataFrame:
    df = pd.read_csv(path)
    missing = [c for c in REQUIRED_COLUMNS[kind] if c not in df.columns]
    if missing:
        raise SpecError(f"{path}: missing required columns {missing}")
    return df


def _prob_matrix(df: pd.DataFrame):
    p = int(df["row"].max()) + 1
    q = int(df["col"].max()) + 1
    M = np.zeros((p, q))
    M[df["row"].to_numpy(), df["col"].to_numpy()] = df["probability"].to_numpy()
    active = np.zeros((p, q), dtype=bool)
    if "active" in df.columns:
        active[df["row"].to_numpy(), df["col"].to_numpy()] = \
            df["active"].astype(bool).to_numpy()
    return M, active


def _render_scatter(spec: FigureSpec):
    df = _read_panel(spec.panels[0].path, "scatter")
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    lim_hi = max(float(df["truth"].max()), float(df["mean_estimate"].max())) * 1.1
    lim_hi = lim_hi if lim_hi > 0 else 1.0
    ax.plot([0, lim_hi], [0, lim_hi], color="black", lw=1, zorder=1)
    ax.errorbar(df["truth"].to_numpy(dtype=float),
                df["mean_estimate"].to_numpy(dtype=float),
                yerr=df["sd_estimate"].to_numpy(dtype=float),
                fmt="o", color="red", ecolor="tab:blue", elinewidth=1,
                capsize=2, ms=4, zorder=2)
    ax.set_xlabel(spec.xlabel or "true mediation quantity")
    ax.set_ylabel(spec.ylabel or "mean estimated mediation quantity")
    if spec.title:
        ax.set_title(spec.title)
    ax.set_xlim(-0.02 * lim_hi, lim_hi)
    ax.set_ylim(-0.02 * lim_hi, lim_hi)
    return fig


def _panel_grid(n_panels, ncols):
    ncols = max(1, min(ncols, n_panels))
    nrows = math.ceil(n_panels / ncols)
    return nrows, ncols


def _render_heatmap(spec: FigureSpec):
    nrows, ncols = _panel_grid(len(spec.panels), spec.ncols)
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.2 * ncols, 2.8 * nrows),
                             squeeze=False)
    im = None
    for k, panel in enumerate(spec.panels):
        ax = axes[k // ncols][k % ncols]
        M, active = _prob_matrix(_read_panel(panel.path, "heatmap"))
        im = ax.imshow(M, vmin=0.0, vmax=1.0, cmap="Reds", aspect="auto",
                       origin="upper")
        if active.any():
            r, c = np.nonzero(active)
            ax.scatter(c, r, s=12, color="black", marker=".")
        ax.set_title(panel.label, fontsize=9)
        ax.set_xlabel(spec.xlabel, fontsize=8)
        ax.set_ylabel(spec.ylabel, fontsize=8)
        ax.tick_params(labelsize=7)
    for k in range(len(spec.panels), nrows * ncols):
        axes[k // ncols][k % ncols].set_visible(False)
    if spec.title:
        fig.suptitle(spec.title)
    fig.colorbar(im, ax=[a for row in axes for a in row if a.get_visible()],
                 fraction=0.02, pad=0.02)
    return fig


def _render_grid_heatmap(spec: FigureSpec):
    annotations = {}
    if spec.summary is not None:
        summary = pd.read_csv(spec.summary)
        for _, row in summary.iterrows():
            annotations[(int(row["p0"]), int(row["q0"]))] = (
                float(row["ve"]), float(row["dic"]))
    nrows, ncols = _panel_grid(len(spec.panels), spec.ncols)
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.4 * ncols, 3.0 * nrows),
                             squeeze=False)
    im = None
    for k, panel in enumerate(spec.panels):
        ax = axes[k // ncols][k % ncols]
        M, active = _prob_matrix(_read_panel(panel.path, "grid-heatmap"))
        im = ax.imshow(M, vmin=0.0, vmax=1.0, cmap="Reds", aspect="auto",
                       origin="upper")
        if active.any():
            r, c = np.nonzero(active)
            ax.scatter(c, r, s=12, color="black", marker=".")
        label = panel.label or (f"p0={panel.p0}, q0={panel.q0}"
                                if panel.p0 is not None else "")
        key = (panel.p0, panel.q0)
        if key in annotations:
            ve, dic = annotations[key]
            label += f"\nVE={100 * ve:.0f}%  DIC={dic:.0f}"
        ax.set_title(label, fontsize=8)
        ax.tick_params(labelsize=7)
    for k in range(len(spec.panels), nrows * ncols):
        axes[k // ncols][k % ncols].set_visible(False)
    if spec.title:
        fig.suptitle(spec.title)
    fig.colorbar(im, ax=[a for row in axes for a in row if a.get_visible()],
                 fraction=0.02, pad=0.02)
    return fig


_RENDERERS = {
    "scatter": _render_scatter,
    "heatmap": _render_heatmap,
    "grid-heatmap": _render_grid_heatmap,
}


def build_figure(spec: FigureSpec):
    """Build (and return) the matplotlib figure for a validated spec."""
    return _RENDERERS[spec.kind](spec)


def render(spec: FigureSpec):
    """Render the figure; writes PNG plus an SVG twin, returns both paths."""
    spec.validate()
    fig = build_figure(spec)
    png = spec.output.with_suffix(".png")
    svg = spec.output.with_suffix(".svg")
    png.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(png, dpi=150, metadata=_PNG_METADATA)
    fig.savefig(svg, metadata=_SVG_METADATA)
    plt.close(fig)
    return png, svg
