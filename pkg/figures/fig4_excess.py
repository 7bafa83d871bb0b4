"""Excess-MSE heatmap over test locations."""

from __future__ import annotations

import os

import numpy as np

import figio


def render(in_dir, out_path):
    table = figio.read_table(os.path.join(in_dir, "excess_grid.csv"))
    figio.check_single_hash([table], extra=[figio.results_hash(in_dir)])
    x = figio.floats(table["x"])
    y = figio.floats(table["y"])
    values = figio.floats(table["value"])
    xs = sorted(set(x))
    ys = sorted(set(y))
    grid = np.full((len(ys), len(xs)), np.nan)
    xi = {v: i for i, v in enumerate(xs)}
    yi = {v: i for i, v in enumerate(ys)}
    for a, b, v in zip(x, y, values):
        grid[yi[b], xi[a]] = v

    fig = figio.new_figure(6.4, 2.6 if len(ys) == 1 else 5.0)
    ax = fig.add_subplot(1, 1, 1)
    im = ax.imshow(grid, origin="lower", cmap="magma", aspect="auto",
                   interpolation="nearest", vmin=0.0, vmax=max(values))
    ax.grid(False)
    fig.colorbar(im, ax=ax, fraction=0.08)
    ax.set_title("excess MSE of the composite predictor")
    ax.set_xlabel("test location index")
    figio.save_figure(fig, out_path)
    return {
        "figure": "fig4-excess",
        "x": x,
        "y": y,
        "value": values,
        "colorbar_max": max(values),
    }
