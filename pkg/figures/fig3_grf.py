"""Random-field realization: heatmap with the held-out box and inducing points."""

from __future__ import annotations

import os

import numpy as np

import figio


def render(in_dir, out_path):
    field = figio.read_table(os.path.join(in_dir, "field.csv"))
    tables = [field]
    inducing = None
    ind_path = os.path.join(in_dir, "inducing.csv")
    if os.path.exists(ind_path):
        inducing = figio.read_table(ind_path)
        tables.append(inducing)
    figio.check_single_hash(tables, extra=[figio.results_hash(in_dir)])

    x1 = figio.floats(field["x1"])
    x2 = figio.floats(field["x2"])
    values = figio.floats(field["value"])
    is_test = [bool(int(v)) for v in field["is_test"]]
    rows = sorted(set(x1))
    cols = sorted(set(x2))
    grid = np.full((len(rows), len(cols)), np.nan)
    row_of = {v: i for i, v in enumerate(rows)}
    col_of = {v: i for i, v in enumerate(cols)}
    for a, b, v in zip(x1, x2, values):
        grid[row_of[a], col_of[b]] = v

    fig = figio.new_figure(6.0, 5.0)
    ax = fig.add_subplot(1, 1, 1)
    im = ax.imshow(grid, origin="lower", cmap="viridis", interpolation="nearest")
    ax.grid(False)
    fig.colorbar(im, ax=ax, fraction=0.046)
    test_rows = [row_of[a] for a, t in zip(x1, is_test) if t]
    test_cols = [col_of[b] for b, t in zip(x2, is_test) if t]
    if test_rows:
        r0, r1 = min(test_rows), max(test_rows)
        c0, c1 = min(test_cols), max(test_cols)
        ax.plot([c0 - 0.5, c1 + 0.5, c1 + 0.5, c0 - 0.5, c0 - 0.5],
                [r0 - 0.5, r0 - 0.5, r1 + 0.5, r1 + 0.5, r0 - 0.5],
                color="red", linewidth=1.5, label="held-out block")
    if inducing is not None:
        ax.plot(figio.floats(inducing["x2"]), figio.floats(inducing["x1"]),
                ".", color="blue", markersize=4, label="inducing")
    ax.legend(fontsize=7, loc="upper right")
    ax.set_title("field realization")
    figio.save_figure(fig, out_path)
    return {
        "figure": "fig3-grf",
        "x1": x1,
        "x2": x2,
        "value": values,
        "is_test": [int(t) for t in is_test],
        "inducing": None if inducing is None else {
            "x1": figio.floats(inducing["x1"]), "x2": figio.floats(inducing["x2"]),
        },
    }
