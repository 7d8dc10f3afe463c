"""Command-line front end: config parsing, sweep execution, CSV/JSON output,
and a self-test runner.

Subcommands
-----------
``run``       execute one sweep from an INI config file (or re-run a
              manifest) and write ``sweep.csv`` plus ``manifest.json``.
``figures``   run one of the built-in preset sweeps (fig2..fig7) that cover
              the standard comparison plots; no config file needed.
``selftest``  run the oracle suites (assignment brute force, gradient and
              curvature checks, distribution tests) and report pass/fail.

Exit codes: 0 success, 1 selftest failure, 2 usage/config error,
3 infeasible scenario.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .simulation import ScenarioConfig, SweepResult, run_sweep

TOOL_NAME = "fdxsim"
CSV_NAME = "sweep.csv"
MANIFEST_NAME = "manifest.json"
CSV_HEADER = ["axis", "series", "mean_sumrate_bps_hz", "stderr", "trials", "failed_trials"]
SEED_ENV_VAR = "FDXSIM_SEED"

# INI layout: which section owns each scenario field, and the key it uses
# there. Flat field names double as bare --set keys.
_SECTION_OF = {
    "k1": ("scenario", "k1"),
    "k2": ("scenario", "k2"),
    "n": ("scenario", "n"),
    "w_hz": ("scenario", "w_hz"),
    "n0_dbm_hz": ("scenario", "n0_dbm_hz"),
    "pmax_user_dbm": ("scenario", "pmax_user_dbm"),
    "pmax_bs_dbm": ("scenario", "pmax_bs_dbm"),
    "scheme": ("scenario", "scheme"),
    "rmin_coop": ("scenario", "rmin_coop"),
    "rmin_nc": ("scenario", "rmin_nc"),
    "exclusive_relays": ("scenario", "exclusive_relays"),
    "trials": ("scenario", "trials"),
    "seed": ("scenario", "seed"),
    "r1_m": ("geometry", "r1_m"),
    "r2_m": ("geometry", "r2_m"),
    "alpha": ("geometry", "alpha"),
    "si_enabled": ("si", "enabled"),
    "si_residual_factor": ("si", "residual_factor"),
}
_FIELD_BY_SECTION_KEY = {(sec, key): field for field, (sec, key) in _SECTION_OF.items()}

_INT_FIELDS = {"k1", "k2", "n", "trials", "seed"}
_BOOL_FIELDS = {"si_enabled", "exclusive_relays"}
_STR_FIELDS = {"scheme"}

_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}

PMAX_GRID_DBM = [0.0, 5.0, 10.0, 15.0, 20.0]

_K_SERIES = [("2x2", {"k1": 2, "k2": 2}), ("4x4", {"k1": 4, "k2": 4}), ("8x8", {"k1": 8, "k2": 8})]
_ALL_SCHEMES = [
    "best-sinr-si",
    "best-sinr-nosi",
    "harmonic-mean",
    "shortest-user-distance",
    "shortest-total-distance",
    "least-longest-hop",
    "shortest-second-hop",
]

# name -> (base config overrides, series list). Axis is always the user
# power grid; every other default comes from ScenarioConfig.
FIGURE_PRESETS: dict[str, tuple[dict, list[tuple[str, dict]]]] = {
    "fig2": ({"si_enabled": True, "scheme": "best-sinr-si"}, _K_SERIES),
    "fig3": ({"si_enabled": False, "scheme": "best-sinr-nosi"}, _K_SERIES),
    "fig4": ({}, [("si_on", {"si_enabled": True}), ("si_off", {"si_enabled": False})]),
    "fig5": ({"si_enabled": True}, [(s, {"scheme": s}) for s in _ALL_SCHEMES]),
    "fig6": ({"si_enabled": False}, [(s, {"scheme": s}) for s in _ALL_SCHEMES]),
    "fig7": (
        {"si_enabled": False, "scheme": "shortest-total-distance"},
        _K_SERIES,
    ),
}


class UsageError(Exception):
    """Bad invocation, config file, or override (exit code 2)."""


class InfeasibleScenario(Exception):
    """Structurally unservable scenario (exit code 3)."""


def _parse_field(field: str, raw: str) -> object:
    raw = raw.strip()
    try:
        if field in _INT_FIELDS:
            return int(raw)
        if field in _BOOL_FIELDS:
            low = raw.lower()
            if low in _TRUE_WORDS:
                return True
            if low in _FALSE_WORDS:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if field in _STR_FIELDS:
            return raw
        return float(raw)
    except ValueError as exc:
        raise UsageError(f"field {field!r}: {exc}") from exc


def _resolve_key(dotted: str) -> str:
    """Map a bare or dotted override key to a ScenarioConfig field name."""
    if "." in dotted:
        section, _, key = dotted.partition(".")
        field = _FIELD_BY_SECTION_KEY.get((section, key))
        if field is None:
            raise UsageError(f"unknown config key {dotted!r}")
        return field
    if dotted in _SECTION_OF:
        return dotted
    # section-local key written without its section prefix (e.g. "enabled")
    matches = [f for (sec, key), f in _FIELD_BY_SECTION_KEY.items() if key == dotted]
    if len(matches) == 1:
        return matches[0]
    raise UsageError(f"unknown config key {dotted!r}")


@dataclasses.dataclass
class SweepSpec:
    """A fully resolved run: scenario + axis + series."""

    scenario: ScenarioConfig
    axis: str = "pmax_user_dbm"
    values: list = dataclasses.field(default_factory=lambda: list(PMAX_GRID_DBM))
    series: list[tuple[str, dict]] = dataclasses.field(default_factory=list)


def _load_config_file(path: Path) -> SweepSpec:
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as handle:
            parser.read_file(handle, source=str(path))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from exc

    kwargs: dict[str, object] = {}
    for section in ("scenario", "geometry", "si"):
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            field = _FIELD_BY_SECTION_KEY.get((section, key))
            if field is None:
                raise UsageError(f"{path}: unknown key {key!r} in section [{section}]")
            kwargs[field] = _parse_field(field, raw)

    axis = "pmax_user_dbm"
    values: list = list(PMAX_GRID_DBM)
    if parser.has_section("sweep"):
        for key, raw in parser.items("sweep"):
            if key == "axis":
                axis = raw.strip()
            elif key == "values":
                values = [token.strip() for token in raw.split(",") if token.strip()]
            else:
                raise UsageError(f"{path}: unknown key {key!r} in section [sweep]")
    if axis not in _SECTION_OF or axis in _STR_FIELDS | _BOOL_FIELDS:
        raise UsageError(f"{path}: sweep axis must be a numeric scenario field, got {axis!r}")
    values = [_parse_field(axis, str(v)) for v in values]
    if not values:
        raise UsageError(f"{path}: sweep values must be non-empty")

    series: list[tuple[str, dict]] = []
    for section in parser.sections():
        if not section.startswith("series."):
            continue
        label = section[len("series.") :]
        overrides = {}
        for key, raw in parser.items(section):
            field = _resolve_key(key)
            overrides[field] = _parse_field(field, raw)
        series.append((label, overrides))

    try:
        scenario = ScenarioConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"{path}: {exc}") from exc
    return SweepSpec(scenario=scenario, axis=axis, values=values, series=series)


def _load_manifest(path: Path) -> SweepSpec:
    if not path.is_file():
        raise UsageError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from exc
    try:
        scenario = ScenarioConfig(**doc["scenario"])
        sweep = doc["sweep"]
        series = [(entry["label"], dict(entry["overrides"])) for entry in sweep["series"]]
        return SweepSpec(
            scenario=scenario,
            axis=sweep["axis"],
            values=list(sweep["values"]),
            series=series,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: invalid manifest: {exc}") from exc


def _apply_overrides(spec: SweepSpec, sets: list[str]) -> SweepSpec:
    updates: dict[str, object] = {}
    for item in sets:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        field = _resolve_key(key.strip())
        updates[field] = _parse_field(field, raw)
    if not updates:
        return spec
    try:
        scenario = dataclasses.replace(spec.scenario, **updates)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    return dataclasses.replace(spec, scenario=scenario)


def _apply_seed(spec: SweepSpec, flag_seed: int | None) -> SweepSpec:
    """Seed precedence: config file < FDXSIM_SEED env var < --seed flag."""
    seed = spec.scenario.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            seed = int(env)
        except ValueError as exc:
            raise UsageError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from exc
    if flag_seed is not None:
        seed = flag_seed
    if seed == spec.scenario.seed:
        return spec
    try:
        scenario = dataclasses.replace(spec.scenario, seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return dataclasses.replace(spec, scenario=scenario)


def _check_feasible(spec: SweepSpec) -> None:
    """Reject scenarios no trial could ever serve."""
    grids = [dict(ov) for _, ov in spec.series] or [{}]
    for overrides in grids:
        k1 = overrides.get("k1", spec.scenario.k1)
        k2 = overrides.get("k2", spec.scenario.k2)
        exclusive = overrides.get("exclusive_relays", spec.scenario.exclusive_relays)
        if exclusive and k1 > k2:
            raise InfeasibleScenario(
                f"{k1} relayed users need {k1} distinct relays but only {k2} exist "
                "(exclusive_relays is enabled)"
            )


def _fmt(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return repr(float(value))


def write_csv(result: SweepResult, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for p in result.points:
            writer.writerow(
                [_fmt(p.axis), p.series, _fmt(p.mean_sumrate_bps_hz), _fmt(p.stderr), p.trials, p.failed_trials]
            )


def write_manifest(spec: SweepSpec, csv_path: Path, path: Path) -> None:
    doc = {
        "tool": TOOL_NAME,
        "version": __version__,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "scenario": dataclasses.asdict(spec.scenario),
        "sweep": {
            "axis": spec.axis,
            "values": list(spec.values),
            "series": [{"label": label, "overrides": overrides} for label, overrides in spec.series],
        },
        "outputs": {"csv": csv_path.name},
        "units": {"mean_sumrate_bps_hz": "bit/s/Hz", "axis_pmax": "dBm", "w_hz": spec.scenario.w_hz},
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _execute(spec: SweepSpec, out_dir: Path, workers: int) -> Path:
    _check_feasible(spec)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_sweep(
        spec.scenario,
        spec.axis,
        spec.values,
        series=spec.series or None,
        workers=workers,
    )
    if all(p.failed_trials == p.trials for p in result.points):
        raise InfeasibleScenario("every trial of every sweep point failed")
    csv_path = out_dir / CSV_NAME
    write_csv(result, csv_path)
    write_manifest(spec, csv_path, out_dir / MANIFEST_NAME)
    return csv_path


def cmd_run(args: argparse.Namespace) -> int:
    if bool(args.config) == bool(args.manifest):
        raise UsageError("run needs exactly one of --config or --manifest")
    if args.config:
        spec = _load_config_file(Path(args.config))
    else:
        spec = _load_manifest(Path(args.manifest))
    spec = _apply_overrides(spec, args.set or [])
    spec = _apply_seed(spec, args.seed)
    csv_path = _execute(spec, Path(args.out_dir), args.threads)
    print(f"wrote {csv_path} and {csv_path.with_name(MANIFEST_NAME)}")
    return 0


def cmd_figures(args: argparse.Namespace) -> int:
    name = args.figure
    if name not in FIGURE_PRESETS:
        raise UsageError(f"unknown figure {name!r}; choose from {', '.join(sorted(FIGURE_PRESETS))}")
    base_overrides, series = FIGURE_PRESETS[name]
    try:
        scenario = ScenarioConfig(**base_overrides)
    except ValueError as exc:  # pragma: no cover - presets are valid
        raise UsageError(str(exc)) from exc
    spec = SweepSpec(scenario=scenario, series=list(series))
    spec = _apply_overrides(spec, args.set or [])
    spec = _apply_seed(spec, args.seed)
    out_dir = Path(args.out_dir) / name
    csv_path = _execute(spec, out_dir, args.threads)
    print(f"wrote {csv_path} and {csv_path.with_name(MANIFEST_NAME)}")
    return 0


# ---------------------------------------------------------------------------
# Self test
# ---------------------------------------------------------------------------


def _selftest_assignment(rng: np.random.Generator) -> str:
    from itertools import permutations

    from .assignment import munkres

    for _ in range(120):
        n = int(rng.integers(2, 6))
        matrix = rng.integers(0, 50, size=(n, n)).astype(float)
        pair_of = munkres(matrix, maximize=True)
        got = sum(matrix[i, pair_of[i]] for i in range(n))
        best = max(sum(matrix[i, perm[i]] for i in range(n)) for perm in permutations(range(n)))
        if got != best:
            return f"assignment value {got} != exhaustive optimum {best}"
    return ""


def _random_power_instance(rng: np.random.Generator):
    """Random gains plus a schedule mixing relayed and direct winners."""
    from .assignment import Assignment
    from .link_budget import BsPowerPolicy, NormalizedGains
    from .power_allocation import PowerProfile, _inject, build_groups

    k1, k2, n = 2, 3, 4
    gains = NormalizedGains(
        a=rng.uniform(0.5, 50.0, (k1, k2, n)),
        b1=rng.uniform(0.5, 50.0, (k2, n)),
        b2=rng.uniform(0.5, 50.0, (k2, n)),
        c_si=rng.uniform(0.0, 2.0, n),
    )
    rho = np.zeros((k1, k2, n, n), dtype=np.int8)
    sigma1 = np.zeros((k2, n), dtype=np.int8)
    sigma2 = np.zeros((k2, n), dtype=np.int8)
    for cell in range(n):
        if rng.uniform() < 0.5:
            rho[int(rng.integers(k1)), int(rng.integers(k2)), cell, cell] = 1
        else:
            m = int(rng.integers(k2))
            sigma1[m, cell] = 1
            sigma2[int(rng.integers(k2)), cell] = 1
    assignment = Assignment(rho=rho, sigma1=sigma1, sigma2=sigma2, pair_of=np.arange(n))
    bs = BsPowerPolicy.uniform(rng.uniform(0.5, 4.0), n)
    powers = PowerProfile.zeros(k1, k2, n)
    coop, nc = build_groups(assignment, gains, bs)
    groups = [*coop, *nc]
    for group in groups:
        size = group.n_vars if hasattr(group, "n_vars") else len(group.subcarriers)
        _inject(powers, group, rng.uniform(0.05, 2.0, size))
    return assignment, gains, bs, powers, groups


def _selftest_gradient(rng: np.random.Generator) -> str:
    from .power_allocation import _extract, _inject, objective_and_gradient

    worst = 0.0
    step = 1e-6
    for _ in range(25):
        assignment, gains, bs, powers, groups = _random_power_instance(rng)
        _, grad = objective_and_gradient(powers, assignment, gains, bs)
        fd = []
        for group in groups:
            base = _extract(powers, group)
            for idx in range(len(base)):
                for sign in (+1.0, -1.0):
                    bumped = base.copy()
                    bumped[idx] += sign * step
                    _inject(powers, group, bumped)
                    value, _ = objective_and_gradient(powers, assignment, gains, bs)
                    fd.append(sign * value)
                _inject(powers, group, base)
        fd_grad = (np.asarray(fd[0::2]) + np.asarray(fd[1::2])) / (2.0 * step)
        scale = np.maximum(np.maximum(np.abs(fd_grad), np.abs(grad)), 1e-9)
        worst = max(worst, float(np.max(np.abs(fd_grad - grad) / scale)))
    if worst > 1e-5:
        return f"max relative gradient error {worst:.2e} > 1e-5"
    return ""


def _selftest_curvature(rng: np.random.Generator) -> str:
    from .power_allocation import (
        coop_hessian_closed_form,
        coop_hessian_eigenvalues,
        nc_hessian_and_eigenvalues,
    )

    for _ in range(2000):
        x, y, a, b, c = rng.uniform(0.1, 10.0, size=5)
        hess = coop_hessian_closed_form(x, y, a, b, c)
        eig_formula = coop_hessian_eigenvalues(x, y, a, b, c)
        eig_numeric = np.sort(np.linalg.eigvalsh(hess))
        if not np.allclose(np.sort(eig_formula), eig_numeric, rtol=1e-6, atol=1e-9):
            return "relayed-link curvature eigenvalues disagree with the closed form"
        if eig_numeric.max() > 1e-9:
            return f"relayed-link curvature not negative semidefinite: {eig_numeric.max():.2e}"
        z = rng.uniform(0.0, 10.0)
        curvature, eigs = nc_hessian_and_eigenvalues(x, b, c, z)
        if max(eigs) > 1e-9 or curvature > 1e-9:
            return "direct-link curvature is not non-positive"
        if abs(min(eigs) - curvature) > 1e-9 * max(1.0, abs(curvature)):
            return "direct-link curvature disagrees with its eigenvalue form"
    return ""


def _selftest_distribution(rng: np.random.Generator) -> str:
    from .channel import draw_complex_gaussian
    from .geometry import CellGeometry, sample_relay_position, sample_user_position

    local = np.random.default_rng(int(rng.integers(0, 2**31)))
    geometry = CellGeometry(r1=100.0, r2=300.0, alpha=3.0)
    n_pos = 50_000
    relays = [sample_relay_position(local, geometry) for _ in range(n_pos)]
    users = [sample_user_position(local, geometry) for _ in range(n_pos)]
    crit_pos = 1.628 / math.sqrt(n_pos)  # asymptotic KS critical value at 0.01
    checks = [
        ("relay radius", np.array([p.r for p in relays]) / geometry.r1),
        ("relay angle", np.array([p.theta for p in relays]) / (2.0 * math.pi)),
        ("user radius", (np.array([p.r for p in users]) - geometry.r1) / (geometry.r2 - geometry.r1)),
        ("user angle", np.array([p.theta for p in users]) / (2.0 * math.pi)),
    ]
    for label, uniform in checks:
        d = _ks_distance(np.sort(uniform))
        if d > crit_pos:
            return f"{label} KS distance {d:.2e} > {crit_pos:.2e}"
    n_fade = 400_000
    power = np.abs(draw_complex_gaussian(local, n_fade)) ** 2
    if abs(power.mean() - 1.0) > 6.0 / math.sqrt(n_fade):
        return f"fading power mean {power.mean():.4f} too far from 1"
    d = _ks_distance(np.sort(-np.expm1(-power)))
    crit_fade = 1.628 / math.sqrt(n_fade)
    if d > crit_fade:
        return f"fading power KS distance {d:.2e} > {crit_fade:.2e}"
    return ""


def _ks_distance(sorted_uniform: np.ndarray) -> float:
    """Two-sided Kolmogorov-Smirnov statistic against U[0, 1]."""
    n = len(sorted_uniform)
    i = np.arange(1, n + 1)
    d_plus = float(np.max(i / n - sorted_uniform))
    d_minus = float(np.max(sorted_uniform - (i - 1) / n))
    return max(d_plus, d_minus)


SELFTEST_SUITES = [
    ("assignment-oracle", _selftest_assignment),
    ("gradient-check", _selftest_gradient),
    ("curvature-certificates", _selftest_curvature),
    ("distribution-suite", _selftest_distribution),
]


def cmd_selftest(_args: argparse.Namespace) -> int:
    rng = np.random.default_rng(20260819)
    failures = 0
    for name, suite in SELFTEST_SUITES:
        start = time.perf_counter()
        try:
            problem = suite(rng)
        except Exception as exc:  # noqa: BLE001 - a crashing suite is a failure
            problem = f"{type(exc).__name__}: {exc}"
        elapsed = time.perf_counter() - start
        if problem:
            failures += 1
            print(f"FAIL {name} ({elapsed:.1f}s): {problem}")
        else:
            print(f"PASS {name} ({elapsed:.1f}s)")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=TOOL_NAME, description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_shared(p: argparse.ArgumentParser) -> None:
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field (dotted or bare key)")
        p.add_argument("--seed", type=int, default=None, help="override the random seed (highest precedence)")
        p.add_argument("--out-dir", default=".", help="directory for sweep.csv and manifest.json")
        p.add_argument("--threads", type=int, default=1, help="worker process cap for sweep points")

    p_run = sub.add_parser("run", help="run one sweep from a config file or manifest")
    p_run.add_argument("--config", help="INI config file path")
    p_run.add_argument("--manifest", help="re-run a previously written manifest.json")
    add_shared(p_run)
    p_run.set_defaults(func=cmd_run)

    p_fig = sub.add_parser("figures", help="run a built-in preset sweep")
    p_fig.add_argument("figure", help="one of fig2..fig7")
    add_shared(p_fig)
    p_fig.set_defaults(func=cmd_figures)

    p_self = sub.add_parser("selftest", help="run the oracle suites")
    p_self.set_defaults(func=cmd_selftest)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InfeasibleScenario as exc:
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
