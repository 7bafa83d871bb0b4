"""Posterior panels: mean with 95% band per method, covariance heatmaps below."""

from __future__ import annotations

import math
import os

import figio


def render(in_dir, out_path):
    pred = figio.read_table(os.path.join(in_dir, "predictions.csv"))
    cov = figio.read_table(os.path.join(in_dir, "covariance.csv"))
    tables = [pred, cov]
    actual = None
    actual_path = os.path.join(in_dir, "actuals.csv")
    if os.path.exists(actual_path):
        actual = figio.read_table(actual_path)
        tables.append(actual)
    figio.check_single_hash(tables, extra=[figio.results_hash(in_dir)])

    methods = [m for m in figio.METHOD_ORDER if m in set(pred["method"])]
    if not methods:
        raise figio.MissingInput("predictions.csv contains no known methods")

    export = {"figure": "fig2-posteriors", "methods": {}}
    fig = figio.new_figure(3.6 * len(methods), 6.4)
    for i, method in enumerate(methods):
        rows = [j for j, m in enumerate(pred["method"]) if m == method]
        x = [float(pred["x"][j]) for j in rows]
        mean = [float(pred["mean"][j]) for j in rows]
        var = [float(pred["variance"][j]) for j in rows]
        lo = [m - 1.96 * math.sqrt(max(v, 0.0)) for m, v in zip(mean, var)]
        hi = [m + 1.96 * math.sqrt(max(v, 0.0)) for m, v in zip(mean, var)]

        ax = fig.add_subplot(2, len(methods), i + 1)
        ax.fill_between(x, lo, hi, color=figio.COLORS[method], alpha=0.25, linewidth=0)
        ax.plot(x, mean, color=figio.COLORS[method], label=f"{method} mean")
        if actual is not None:
            ax.plot(figio.floats(actual["x"]), figio.floats(actual["value"]),
                    ".", color=figio.COLORS["actual"], markersize=3, label="actual")
        ax.set_title(f"{method} posterior")
        ax.legend(fontsize=7)

        crows = [j for j, m in enumerate(cov["method"]) if m == method]
        dim = int(max(int(cov["row"][j]) for j in crows)) + 1
        matrix = [[0.0] * dim for _ in range(dim)]
        for j in crows:
            matrix[int(cov["row"][j])][int(cov["col"][j])] = float(cov["value"][j])
        ax2 = fig.add_subplot(2, len(methods), len(methods) + i + 1)
        im = ax2.imshow(matrix, cmap="viridis", interpolation="nearest")
        ax2.grid(False)
        ax2.set_title(f"{method} covariance")
        fig.colorbar(im, ax=ax2, fraction=0.046)

        export["methods"][method] = {
            "x": x, "mean": mean, "variance": var, "covariance": matrix,
        }
    if actual is not None:
        export["actual"] = {"x": figio.floats(actual["x"]),
                            "value": figio.floats(actual["value"])}
    figio.save_figure(fig, out_path)
    return export
