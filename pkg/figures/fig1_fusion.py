"""Fusion-trajectory panels: fused parameter estimates against segment count."""

from __future__ import annotations

import glob
import os
import re

import figio


def render(in_dir, out_path):
    paths = sorted(glob.glob(os.path.join(in_dir, "fusion_nk*.csv")))
    if not paths:
        raise figio.MissingInput(f"no fusion_nk*.csv in {in_dir}")
    tables = [figio.read_table(p) for p in paths]
    figio.check_single_hash(tables, extra=[figio.results_hash(in_dir)])

    panels = []
    for path, table in zip(paths, tables):
        n_k = int(re.search(r"fusion_nk(\d+)", os.path.basename(path)).group(1))
        skip = {"method", "config_hash", "n_k", "k"}
        params = [c for c in table if c not in skip]
        panels.append({
            "n_k": n_k,
            "k": figio.floats(table["k"]),
            "series": {p: figio.floats(table[p]) for p in params},
        })
    panels.sort(key=lambda p: p["n_k"])

    fig = figio.new_figure(4.0 * len(panels), 3.2)
    for i, panel in enumerate(panels):
        ax = fig.add_subplot(1, len(panels), i + 1)
        for j, (name, values) in enumerate(sorted(panel["series"].items())):
            color = list(figio.COLORS.values())[j % len(figio.COLORS)]
            ax.plot(panel["k"], values, marker=".", color=color, label=name)
        ax.set_title(f"segment length {panel['n_k']}")
        ax.set_xlabel("segments fused")
        if i == 0:
            ax.set_ylabel("fused estimate")
        ax.legend(fontsize=7)
    figio.save_figure(fig, out_path)
    return {
        "figure": "fig1-fusion",
        "panels": [
            {"n_k": p["n_k"], "k": p["k"], "series": p["series"]} for p in panels
        ],
    }
