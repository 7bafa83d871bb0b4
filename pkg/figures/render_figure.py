#!/usr/bin/env python3
"""Render one figure from an experiment output directory.

Usage:
    render_figure.py --fig <id> --in <dir> --out <path> [--export-data <path>]

Figure ids: fig1-fusion, fig2-posteriors, fig3-grf, fig4-excess,
fig6-tradeoff. The optional export writes the exact arrays that were
plotted, for byte-level read-back checks.

Exit codes: 0 ok, 2 bad arguments, 3 config-hash mismatch, 4 missing input.
"""

from __future__ import annotations

import argparse
import sys

import fig1_fusion
import fig2_posteriors
import fig3_grf
import fig4_excess
import fig6_tradeoff
import figio

RENDERERS = {
    "fig1-fusion": fig1_fusion.render,
    "fig2-posteriors": fig2_posteriors.render,
    "fig3-grf": fig3_grf.render,
    "fig4-excess": fig4_excess.render,
    "fig6-tradeoff": fig6_tradeoff.render,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="render_figure")
    parser.add_argument("--fig", required=True, choices=sorted(RENDERERS))
    parser.add_argument("--in", dest="in_dir", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--export-data", default=None)
    args = parser.parse_args(argv)
    try:
        data = RENDERERS[args.fig](args.in_dir, args.out)
    except figio.HashMismatch as exc:
        print(f"hash mismatch: {exc}", file=sys.stderr)
        return 3
    except figio.MissingInput as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return 4
    if args.export_data:
        figio.save_export(args.export_data, data)
    return 0


if __name__ == "__main__":
    sys.exit(main())
