#!/usr/bin/env python3
"""Run every figure preset sweep and render each CSV to an SVG.

For each preset (fig2..fig7) this drives the simulator CLI to produce
``<out-dir>/<name>/sweep.csv`` plus its manifest, then renders
``<out-dir>/<name>/<name>.svg`` from that CSV.  At the default 500 trials
per point the full set takes tens of minutes on one core; use ``--trials``
for a quick pass (e.g. ``--trials 25``).

Example:
    python3 scripts/make_all_figures.py --out-dir figures_out --trials 50
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from fdxfigures import render_file
from fdxsim.cli import FIGURE_PRESETS, main as cli_main

TITLES = {
    "fig2": "K scaling, self-interference on",
    "fig3": "K scaling, self-interference off",
    "fig4": "Self-interference on vs off",
    "fig5": "Selection schemes, self-interference on",
    "fig6": "Selection schemes, self-interference off",
    "fig7": "K scaling, shortest-total-distance, self-interference off",
}


def parse_args(argv: list[str] | None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--out-dir",
        default="figures_out",
        help="directory receiving one subdirectory per figure",
    )
    parser.add_argument(
        "--trials",
        type=int,
        default=None,
        help="override Monte Carlo trials per sweep point",
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="override the base RNG seed"
    )
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="extra scenario override forwarded to every preset",
    )
    parser.add_argument(
        "--only",
        choices=sorted(FIGURE_PRESETS),
        action="append",
        help="restrict to the named preset (repeatable)",
    )
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    names = args.only or sorted(FIGURE_PRESETS)
    overrides = list(args.set)
    if args.trials is not None:
        overrides.append(f"trials={args.trials}")
    out_root = Path(args.out_dir)
    for name in names:
        cli_argv = ["figures", name, "--out-dir", str(out_root)]
        for item in overrides:
            cli_argv += ["--set", item]
        if args.seed is not None:
            cli_argv += ["--seed", str(args.seed)]
        started = time.perf_counter()
        rc = cli_main(cli_argv)
        if rc != 0:
            print(f"{name}: sweep failed with exit code {rc}", file=sys.stderr)
            return rc
        csv_path = out_root / name / "sweep.csv"
        svg_path = out_root / name / f"{name}.svg"
        rc = render_file(csv_path, svg_path, title=TITLES[name])
        if rc != 0:
            print(f"{name}: render failed with exit code {rc}", file=sys.stderr)
            return rc
        elapsed = time.perf_counter() - started
        print(f"{name}: wrote {svg_path} ({elapsed:.1f}s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
