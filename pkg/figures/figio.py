"""Shared I/O for the figure scripts.

Reads only the experiment runner's documented file formats (headered CSV
tables whose rows carry a ``config_hash`` column, plus ``results.json``).
Rendering never recomputes numerics: whatever is plotted is exactly what
was parsed, and the same arrays can be exported for read-back checks.
"""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


class HashMismatch(Exception):
    """Inputs of one figure carry different config hashes."""


class MissingInput(Exception):
    """A required input file is absent."""


def read_table(path):
    """Read a headered CSV into a dict of column name -> list of strings."""
    if not os.path.exists(path):
        raise MissingInput(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if reader.fieldnames is None:
        raise MissingInput(f"{path}: empty file")
    return {name: [row[name] for row in rows] for name in reader.fieldnames}


def floats(column):
    return [float(v) for v in column]


def results_hash(in_dir):
    path = os.path.join(in_dir, "results.json")
    if not os.path.exists(path):
        raise MissingInput(path)
    with open(path) as fh:
        return json.load(fh)["config_hash"]


def check_single_hash(tables, extra=()):
    """All rows of all tables (plus any extra hashes) must agree on one hash."""
    seen = set(extra)
    for table in tables:
        seen.update(table.get("config_hash", []))
    if len(seen) != 1:
        raise HashMismatch(f"config hashes disagree: {sorted(seen)}")
    return seen.pop()


# Fixed style so renders are deterministic across runs.
COLORS = {"GP": "#1f77b4", "CGP": "#d62728", "SGP": "#2ca02c",
          "actual": "#7f7f7f", "default": "#9467bd"}
METHOD_ORDER = ("GP", "CGP", "SGP")


def new_figure(width, height):
    plt.rcParams.update({
        "figure.dpi": 100,
        "savefig.dpi": 100,
        "font.family": "DejaVu Sans",
        "font.size": 9,
        "axes.grid": True,
        "grid.alpha": 0.3,
    })
    return plt.figure(figsize=(width, height))


def save_figure(fig, out_path):
    fig.savefig(out_path, bbox_inches="tight")
    plt.close(fig)


def save_export(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
