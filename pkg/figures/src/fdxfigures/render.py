"""Line-figure rendering for sweep CSV files.

The input is the simulator CLI's sweep table: one row per (axis value,
series label) with the columns ``axis, series, mean_sumrate_bps_hz, stderr,
trials, failed_trials``.  The output is a single SVG line plot with one
errorbar curve (mean +/- standard error) per series, a legend entry per
curve, and points ordered by ascending axis value.

Guarantees:

* the input CSV is only ever opened for reading;
* output bytes are identical across runs for the same input, title, and
  matplotlib version (generated SVG ids are salted deterministically and no
  timestamp is embedded);
* every schema violation is reported with the offending column named, as a
  nonzero exit code from the CLI entry point.
"""

from __future__ import annotations

import argparse
import csv
import math
import re
import sys
from dataclasses import dataclass
from pathlib import Path

from matplotlib import rc_context
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

#: Required CSV header, in order.
CSV_COLUMNS = (
    "axis",
    "series",
    "mean_sumrate_bps_hz",
    "stderr",
    "trials",
    "failed_trials",
)

# Fixed salt for matplotlib's content-hashed SVG ids (clip paths, glyph
# defs); without it every run invents fresh ids and output is not
# reproducible.
_HASH_SALT = "fdxfigures"

_ID_UNSAFE = re.compile(r"[^A-Za-z0-9_.:-]")


class RenderError(Exception):
    """Any failure that should abort rendering with a diagnostic."""


class SchemaError(RenderError):
    """The input CSV does not match the sweep CSV schema."""


@dataclass(frozen=True)
class SeriesCurve:
    """One plottable series: points sorted by ascending axis value."""

    label: str
    x: tuple[float, ...]
    mean: tuple[float, ...]
    stderr: tuple[float, ...]


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: input table, curve subset, labels, and output path.

    ``series`` selects and orders a subset of the CSV's series labels; the
    empty tuple draws every series in file order.  Every label listed must
    exist in the CSV.  The default axis labels match the sweep the CLI
    presets produce (mean sum-rate versus the user transmit-power budget);
    callers sweeping something else should override them.
    """

    csv_path: Path
    out_path: Path
    title: str
    series: tuple[str, ...] = ()
    xlabel: str = "User max transmit power (dBm)"
    ylabel: str = "Mean sum-rate (bit/s/Hz)"


def _parse_float(path: Path, lineno: int, column: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise SchemaError(
            f"{path}: row {lineno}: invalid value {text!r} in column {column!r}"
        ) from None


def _parse_count(path: Path, lineno: int, column: str, text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise SchemaError(
            f"{path}: row {lineno}: invalid value {text!r} in column {column!r}"
        ) from None
    if value < 0:
        raise SchemaError(
            f"{path}: row {lineno}: negative value in column {column!r}"
        )
    return value


def _check_header(path: Path, header: list[str]) -> None:
    names = [name.strip() for name in header]
    for name in CSV_COLUMNS:
        if name not in names:
            raise SchemaError(f"{path}: missing required column {name!r}")
    for name in names:
        if name not in CSV_COLUMNS:
            raise SchemaError(f"{path}: unexpected column {name!r}")
    if names != list(CSV_COLUMNS):
        for got, want in zip(names, CSV_COLUMNS):
            if got != want:
                raise SchemaError(
                    f"{path}: column {got!r} out of order (expected {want!r})"
                )


def _parse_row(
    path: Path, lineno: int, row: list[str]
) -> tuple[str, float, float, float]:
    if len(row) != len(CSV_COLUMNS):
        if len(row) < len(CSV_COLUMNS):
            raise SchemaError(
                f"{path}: row {lineno}: missing value for column "
                f"{CSV_COLUMNS[len(row)]!r}"
            )
        raise SchemaError(
            f"{path}: row {lineno}: {len(row)} fields, expected "
            f"{len(CSV_COLUMNS)}"
        )
    axis_text, label, mean_text, err_text, trials_text, failed_text = (
        field.strip() for field in row
    )
    x = _parse_float(path, lineno, "axis", axis_text)
    if not math.isfinite(x):
        raise SchemaError(
            f"{path}: row {lineno}: non-finite value in column 'axis'"
        )
    if not label:
        raise SchemaError(
            f"{path}: row {lineno}: empty value in column 'series'"
        )
    mean = _parse_float(path, lineno, "mean_sumrate_bps_hz", mean_text)
    if math.isinf(mean):
        raise SchemaError(
            f"{path}: row {lineno}: non-finite value in column "
            f"'mean_sumrate_bps_hz'"
        )
    err = _parse_float(path, lineno, "stderr", err_text)
    # NaN dispersion is legal (a single-trial point has no sample spread);
    # negative or infinite dispersion is not.
    if math.isinf(err) or err < 0.0:
        raise SchemaError(
            f"{path}: row {lineno}: invalid value {err_text!r} in column "
            f"'stderr'"
        )
    trials = _parse_count(path, lineno, "trials", trials_text)
    failed = _parse_count(path, lineno, "failed_trials", failed_text)
    if failed > trials:
        raise SchemaError(
            f"{path}: row {lineno}: column 'failed_trials' exceeds column "
            f"'trials'"
        )
    return label, x, mean, err


def read_sweep_csv(path: str | Path) -> tuple[SeriesCurve, ...]:
    """Parse a sweep CSV into one curve per series label.

    Series keep their first-appearance order; points within a series are
    sorted by ascending axis value.  Raises :class:`SchemaError` naming the
    offending column on any header or value mismatch, and
    :class:`RenderError` if the file cannot be read.
    """
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise RenderError(
            f"cannot read {path}: {exc.strerror or exc}"
        ) from exc
    table: dict[str, list[tuple[float, float, float]]] = {}
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(
                f"{path}: empty file (expected header "
                f"{','.join(CSV_COLUMNS)})"
            ) from None
        _check_header(path, header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            label, x, mean, err = _parse_row(path, lineno, row)
            table.setdefault(label, []).append((x, mean, err))
    if not table:
        raise SchemaError(f"{path}: no data rows")
    curves = []
    for label, points in table.items():
        points.sort(key=lambda point: point[0])
        xs, means, errs = zip(*points)
        curves.append(
            SeriesCurve(label=label, x=xs, mean=means, stderr=errs)
        )
    return tuple(curves)


def _series_gid(label: str, used: set[str]) -> str:
    """Map a series label to a unique SVG-id-safe token."""
    base = _ID_UNSAFE.sub("-", label) or "series"
    gid = base
    suffix = 2
    while gid in used:
        gid = f"{base}-{suffix}"
        suffix += 1
    used.add(gid)
    return gid


def render(spec: FigureSpec) -> Path:
    """Draw one errorbar curve per selected series and write an SVG.

    Returns the output path.  Raises :class:`RenderError` (or its subclass
    :class:`SchemaError`) on bad input, a series label missing from the CSV,
    an unsupported output extension, or an unwritable output path.
    """
    out = Path(spec.out_path)
    if out.suffix.lower() != ".svg":
        raise RenderError(
            f"unsupported output format {out.suffix or '(none)'!r}: "
            f"output must be an .svg path"
        )
    curves = read_sweep_csv(spec.csv_path)
    if spec.series:
        by_label = {curve.label: curve for curve in curves}
        for wanted in spec.series:
            if wanted not in by_label:
                raise RenderError(
                    f"series {wanted!r} not found in {spec.csv_path}"
                )
        curves = tuple(by_label[wanted] for wanted in spec.series)

    rc = {
        "svg.hashsalt": _HASH_SALT,
        "svg.fonttype": "path",
        "figure.dpi": 100.0,
        "savefig.dpi": 100.0,
    }
    with rc_context(rc):
        fig = Figure(figsize=(7.0, 4.6), layout="constrained")
        FigureCanvasSVG(fig)
        ax = fig.add_subplot()
        containers = []
        for curve in curves:
            containers.append(
                ax.errorbar(
                    curve.x,
                    curve.mean,
                    yerr=curve.stderr,
                    marker="o",
                    markersize=4.0,
                    capsize=3.0,
                    linewidth=1.6,
                    label=curve.label,
                )
            )
        ax.set_title(spec.title)
        ax.set_xlabel(spec.xlabel)
        ax.set_ylabel(spec.ylabel)
        ax.grid(True, alpha=0.35)
        ax.legend()
        ticks = sorted({x for curve in curves for x in curve.x})
        if 2 <= len(ticks) <= 10:
            ax.set_xticks(ticks)
        # Tag groups after the legend is built so its proxy handles cannot
        # inherit the ids: exactly one series-* group per curve.
        used: set[str] = set()
        for curve, container in zip(curves, containers):
            gid = _series_gid(curve.label, used)
            line, caplines, barcols = container
            line.set_gid(f"series-{gid}")
            for index, caps in enumerate(caplines):
                caps.set_gid(f"errorbar-caps-{gid}-{index}")
            for bars in barcols:
                bars.set_gid(f"errorbar-bars-{gid}")
        out.parent.mkdir(parents=True, exist_ok=True)
        try:
            fig.savefig(
                out,
                format="svg",
                metadata={"Date": None, "Title": spec.title},
            )
        except OSError as exc:
            raise RenderError(
                f"cannot write {out}: {exc.strerror or exc}"
            ) from exc
    return out


def render_file(
    csv_path: str | Path,
    out_path: str | Path,
    title: str,
    *,
    series: tuple[str, ...] = (),
    xlabel: str | None = None,
    ylabel: str | None = None,
) -> int:
    """Render ``csv_path`` to ``out_path``; return a process exit code.

    0 on success, 2 on any input, schema, or output failure (a diagnostic
    is printed to stderr).
    """
    extra = {}
    if xlabel is not None:
        extra["xlabel"] = xlabel
    if ylabel is not None:
        extra["ylabel"] = ylabel
    spec = FigureSpec(
        csv_path=Path(csv_path),
        out_path=Path(out_path),
        title=str(title),
        series=tuple(series),
        **extra,
    )
    try:
        render(spec)
    except RenderError as exc:
        print(f"render: error: {exc}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render",
        description=(
            "Render a sweep CSV (axis,series,mean_sumrate_bps_hz,stderr,"
            "trials,failed_trials) as an SVG line figure with one "
            "mean +/- standard-error curve per series."
        ),
    )
    parser.add_argument("--csv", required=True, help="input sweep CSV path")
    parser.add_argument("--out", required=True, help="output .svg path")
    parser.add_argument("--title", required=True, help="figure title")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return render_file(args.csv, args.out, args.title)


if __name__ == "__main__":
    sys.exit(main())
