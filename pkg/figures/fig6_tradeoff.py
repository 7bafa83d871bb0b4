"""Accuracy/runtime trade-off curves from a sweep."""

from __future__ import annotations

import os

import figio


def render(in_dir, out_path):
    table = figio.read_table(os.path.join(in_dir, "sweep.csv"))
    # each sweep point runs its own config; hashes must be consistent within
    # a point but differ across points by construction
    points = {}
    for value, method, rmse, rt, chash in zip(
        table["axis_value"], table["method"], table["rmse"],
        table["runtime_seconds"], table["config_hash"],
    ):
        points.setdefault(value, {})
        if method in points[value]:
            raise figio.HashMismatch(f"duplicate method {method} at axis {value}")
        points[value][method] = (float(rmse), float(rt), chash)
    for value, row in points.items():
        hashes = {entry[2] for entry in row.values()}
        if len(hashes) != 1:
            raise figio.HashMismatch(
                f"config hashes disagree within axis point {value}: {sorted(hashes)}"
            )

    axis_values = sorted(points, key=float)
    methods = [m for m in figio.METHOD_ORDER
               if any(m in points[v] for v in axis_values)]
    export = {"figure": "fig6-tradeoff", "axis": table["axis"][0] if table["axis"] else "",
              "axis_values": [float(v) for v in axis_values], "methods": {}}
    fig = figio.new_figure(9.0, 3.6)
    ax1 = fig.add_subplot(1, 2, 1)
    ax2 = fig.add_subplot(1, 2, 2)
    for method in methods:
        xs = [float(v) for v in axis_values if method in points[v]]
        rmses = [points[v][method][0] for v in axis_values if method in points[v]]
        rts = [points[v][method][1] for v in axis_values if method in points[v]]
        ax1.plot(xs, rmses, marker="o", color=figio.COLORS[method], label=method)
        ax2.plot(xs, rts, marker="o", color=figio.COLORS[method], label=method)
        export["methods"][method] = {"axis": xs, "rmse": rmses, "runtime": rts}
    ax1.set_xlabel(export["axis"])
    ax1.set_ylabel("RMSE")
    ax1.legend(fontsize=7)
    ax2.set_xlabel(export["axis"])
    ax2.set_ylabel("runtime [s]")
    ax2.set_yscale("log")
    ax2.legend(fontsize=7)
    figio.save_figure(fig, out_path)
    return export
