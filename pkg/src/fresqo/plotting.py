"""Heatmaps of long-format correlation CSV files."""
from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["read_map", "render_heatmap"]

_VALUE_COLUMNS = ("g2", "R")


def read_map(csv_path: str, target: str | None = None, value_column: str | None = None):
    """Pivot a long CSV into (omega1, omega2, values[i, j])."""
    with open(csv_path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{csv_path}: no data rows")
    col = value_column or next((c for c in _VALUE_COLUMNS if c in rows[0]), None)
    if col is None or "omega1" not in rows[0] or "omega2" not in rows[0]:
        raise ValueError(f"{csv_path}: needs omega1, omega2 and a value column")
    if target is not None and "target" in rows[0]:
        rows = [r for r in rows if r["target"] == target]
        if not rows:
            raise ValueError(f"{csv_path}: no rows for target {target!r}")
    w1 = np.unique([float(r["omega1"]) for r in rows])
    w2 = np.unique([float(r["omega2"]) for r in rows])
    vals = np.full((w1.size, w2.size), np.nan)
    for r in rows:
        vals[np.searchsorted(w1, float(r["omega1"])), np.searchsorted(w2, float(r["omega2"]))] = float(r[col])
    if np.isnan(vals).any():
        raise ValueError(f"{csv_path}: incomplete grid")
    return w1, w2, vals


def render_heatmap(csv_path: str, out_png: str, scale: str = "log", target: str | None = None,
                   value_column: str | None = None) -> np.ndarray:
    """Render a map with a diverging palette centred on 1 (uncorrelated).

    Returns the plotted array (log10 values for ``scale="log"``).
    """
    w1, w2, vals = read_map(csv_path, target, value_column)
    if scale == "log":
        if np.any(vals <= 0):
            raise ValueError("log scale needs positive values")
        data, centre = np.log10(vals), 0.0
    elif scale == "linear":
        data, centre = vals, 1.0
    else:
        raise ValueError(f"unknown scale {scale!r}")
    if not np.all(np.isfinite(data)):
        raise ValueError("non-finite values in map")
    span = float(np.max(np.abs(data - centre))) or 1.0
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(data.T, origin="lower", aspect="auto", cmap="RdBu_r",
                   vmin=centre - span, vmax=centre + span,
                   extent=(w1[0], w1[-1], w2[0], w2[-1]) if w1.size > 1 and w2.size > 1 else None)
    ax.set_xlabel(r"$\omega_1/\kappa$")
    ax.set_ylabel(r"$\omega_2/\kappa$")
    if target:
        ax.set_title(target)
    fig.colorbar(im, ax=ax, label="log10" if scale == "log" else "value")
    fig.tight_layout()
    fig.savefig(out_png, dpi=110)
    plt.close(fig)
    return data
