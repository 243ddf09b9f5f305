"""Heatmap and line-plot rendering for scan tables.

Styling follows the comparison convention: original gate dotted black,
optimized gate dashed blue, eCD gate solid red.  Outputs are written as
both PNG and SVG with date metadata stripped so identical inputs give
identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "plotviz"  # deterministic SVG ids
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import LogNorm

from .tables import ScanTable, TableFormatError, load_table

METHOD_STYLES = {
    "original": {"linestyle": ":", "color": "black"},
    "optimized": {"linestyle": "--", "color": "tab:blue"},
    "ecd": {"linestyle": "-", "color": "tab:red"},
}

FIGSIZE_HEATMAP = (5.0, 3.6)
FIGSIZE_LINES = (5.0, 3.6)
DPI = 150


@dataclass
class FigureSpec:
    """What to render: input tables, output path, scales, labels, styles."""

    inputs: list
    output: str
    log_color: bool = True
    log_x: bool = False
    log_y: bool = True
    x_label: str = ""
    y_label: str = ""
    title: str = ""
    styles: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            doc = json.load(fh)
        if "inputs" not in doc or "output" not in doc:
            raise TableFormatError(f"{path}: figure spec needs 'inputs' and 'output'")
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in doc.items() if k in known})

    def load_tables(self) -> list[ScanTable]:
        return [load_table(p) for p in self.inputs]

    def style_for(self, method: str) -> dict:
        style = dict(METHOD_STYLES.get(method, {"linestyle": "-", "color": "tab:gray"}))
        style.update(self.styles.get(method, {}))
        return style


def _save(fig, output):
    out = Path(output)
    stem = out.with_suffix("")
    stem.parent.mkdir(parents=True, exist_ok=True)
    png, svg = stem.with_suffix(".png"), stem.with_suffix(".svg")
    fig.savefig(png, dpi=DPI, metadata={"Software": "plotviz"})
    fig.savefig(svg, metadata={"Date": None})
    return png, svg


def _color_norm(tables):
    finite = np.concatenate([t.values[np.isfinite(t.values)].ravel() for t in tables])
    positive = finite[finite > 0]
    if positive.size == 0:
        return None
    vmin = max(positive.min(), 1e-16)
    vmax = max(positive.max(), vmin * 10)
    return LogNorm(vmin=vmin, vmax=vmax)


def plot_heatmap(spec: FigureSpec):
    """Color-coded infidelity maps, one panel per input table."""
    tables = spec.load_tables()
    fig, axes = plt.subplots(1, len(tables),
                             figsize=(FIGSIZE_HEATMAP[0] * len(tables), FIGSIZE_HEATMAP[1]),
                             squeeze=False)
    norm = _color_norm(tables) if spec.log_color else None
    cmap = plt.get_cmap("viridis").copy()
    cmap.set_bad("lightgray")
    mesh = None
    for ax, table in zip(axes[0], tables):
        x_edges = _edges(table.x_values, log=spec.log_x)
        y_edges = _edges(table.y_values, log=False)
        masked = np.ma.masked_invalid(table.values.T)
        mesh = ax.pcolormesh(x_edges, y_edges, masked, norm=norm, cmap=cmap)
        if spec.log_x:
            ax.set_xscale("log")
        ax.set_xlabel(spec.x_label or table.x_label)
        ax.set_ylabel(spec.y_label or table.y_label)
        ax.set_title(table.method or spec.title)
        fig.colorbar(mesh, ax=ax, label="infidelity")
    if spec.title and len(tables) > 1:
        fig.suptitle(spec.title)
    fig.tight_layout()
    paths = _save(fig, spec.output)
    return fig, paths


def _edges(centers, log=False):
    c = np.asarray(centers, dtype=float)
    if c.size == 1:
        pad = 0.5 * (abs(c[0]) if c[0] != 0 else 1.0)
        return np.array([c[0] - pad, c[0] + pad])
    if log:
        lc = np.log(c)
        mid = (lc[1:] + lc[:-1]) / 2
        first = lc[0] - (mid[0] - lc[0])
        last = lc[-1] + (lc[-1] - mid[-1])
        return np.exp(np.concatenate([[first], mid, [last]]))
    mid = (c[1:] + c[:-1]) / 2
    first = c[0] - (mid[0] - c[0])
    last = c[-1] + (c[-1] - mid[-1])
    return np.concatenate([[first], mid, [last]])


def plot_lines(spec: FigureSpec):
    """One styled curve per input table (stability scans, fixed-s cuts)."""
    tables = spec.load_tables()
    fig, ax = plt.subplots(figsize=FIGSIZE_LINES)
    for table in tables:
        if table.values.shape[1] != 1:
            raise TableFormatError(
                f"line plots need single-column tables, got shape {table.values.shape}")
        style = spec.style_for(table.method)
        label = table.method or Path(str(spec.output)).stem
        ax.plot(table.x_values, table.values[:, 0], label=label, **style)
    if spec.log_x:
        ax.set_xscale("log")
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel(spec.x_label or tables[0].x_label)
    ax.set_ylabel(spec.y_label or "infidelity")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    fig.tight_layout()
    paths = _save(fig, spec.output)
    return fig, paths
