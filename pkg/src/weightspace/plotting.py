"""SVG figures for verification reports.

Figures are built on the object-oriented matplotlib API (no pyplot state),
so rendering is safe from worker threads.  A fixed hash salt and an empty
date stamp make the output byte-identical across runs.
"""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

HASH_SALT = "weightspace"
MAX_ROW_COLUMNS = 4


def _numeric_columns(rows):
    cols = []
    for key in rows[0]:
        vals = [r.get(key) for r in rows]
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            arr = np.asarray(vals, dtype=float)
            if np.any(np.isfinite(arr)) and np.ptp(arr[np.isfinite(arr)]) > 0:
                cols.append((key, arr))
    return cols[:MAX_ROW_COLUMNS]


def render_report(report, path: str) -> None:
    """Write an SVG summarising ``report`` to ``path``.

    Curves in ``report.series`` are drawn when present; otherwise varying
    numeric row columns, and failing that the fitted constants as bars.
    """
    fig = Figure(figsize=(6.4, 4.0))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot()
    ax.set_title(f"{report.theorem}: {report.verdict}")
    if report.series:
        for label, (xs, ys) in sorted(report.series.items()):
            ax.plot(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), label=label)
        ax.set_xlabel("x")
        ax.legend(fontsize="small")
    elif report.rows and _numeric_columns(report.rows):
        for key, arr in _numeric_columns(report.rows):
            ax.plot(np.arange(arr.size), arr, marker="o", label=key)
        ax.set_yscale("symlog")
        ax.set_xlabel("row")
        ax.legend(fontsize="small")
    else:
        items = [(k, v) for k, v in sorted(report.fitted_constants.items())
                 if isinstance(v, (int, float)) and math.isfinite(v)]
        if items:
            ax.bar(range(len(items)), [v for _, v in items])
            ax.set_xticks(range(len(items)), [k for k, _ in items], rotation=45, ha="right", fontsize="small")
            ax.set_yscale("symlog")
        else:
            ax.text(0.5, 0.5, "no numeric data", ha="center", va="center", transform=ax.transAxes)
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": HASH_SALT}):
        fig.savefig(path, format="svg", metadata={"Date": None})
