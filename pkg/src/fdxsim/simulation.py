"""Monte Carlo harness: per-trial pipeline and parameter sweeps.

One trial = place nodes, draw channels, pick relays, match subcarrier
pairs, allocate powers, score the schedule. Sweeps rerun the same per-trial
random streams at every grid point (common random numbers), so point-to-
point comparisons are paired and low-variance.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assignment import (
    Assignment,
    build_pair_matrix,
    finalize_assignment,
    munkres,
    repair_for_qos,
)
from .channel import SiConfig, make_realization
from .geometry import CellGeometry, sample_topology
from .link_budget import (
    BsPowerPolicy,
    ProvisionalPowers,
    SinrMode,
    normalized_gains,
    rate_from_sinr,
    sinr_cooperative,
    sinr_noncooperative,
    total_sum_rate,
)
from .power_allocation import Budgets, PowerProfile, SolverReport, solve
from .relay_selection import SelectionResult, SelectionScheme, select_all


def dbm_to_watts(dbm: float) -> float:
    """-inf dBm maps to exactly zero watts."""
    if math.isnan(dbm):
        raise ValueError("dBm value is NaN")
    if dbm == -math.inf:
        return 0.0
    return 1e-3 * 10.0 ** (dbm / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts < 0.0:
        raise ValueError(f"power must be >= 0, got {watts}")
    if watts == 0.0:
        return -math.inf
    return 10.0 * math.log10(watts / 1e-3)


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one simulated scenario.

    k1 far users relay through k2 near users over n subcarrier pairs; all
    power fields are dBm (-inf allowed, meaning zero watts).
    """

    k1: int = 4
    k2: int = 4
    n: int = 8
    w_hz: float = 20e3
    n0_dbm_hz: float = -174.0
    pmax_user_dbm: float = 20.0
    pmax_bs_dbm: float = 40.0
    r1_m: float = 50.0
    r2_m: float = 300.0
    alpha: float = 3.0
    si_enabled: bool = False
    si_residual_factor: float = 1.0
    scheme: str = "best-sinr-si"
    rmin_coop: float = 0.1
    rmin_nc: float = 0.1
    exclusive_relays: bool = True
    trials: int = 500
    seed: int = 1

    def __post_init__(self) -> None:
        for name in ("k1", "k2", "n", "trials"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not (math.isfinite(self.w_hz) and self.w_hz > 0.0):
            raise ValueError(f"w_hz must be finite and > 0, got {self.w_hz}")
        if not math.isfinite(self.n0_dbm_hz):
            raise ValueError(f"n0_dbm_hz must be finite, got {self.n0_dbm_hz}")
        for name in ("pmax_user_dbm", "pmax_bs_dbm"):
            v = getattr(self, name)
            if math.isnan(v) or v == math.inf:
                raise ValueError(f"{name} must be a dBm value or -inf, got {v}")
        # constructing the derived objects runs their own validation
        self.geometry
        self.si
        self.budgets
        self.selection_scheme

    @property
    def geometry(self) -> CellGeometry:
        return CellGeometry(r1=self.r1_m, r2=self.r2_m, alpha=self.alpha)

    @property
    def si(self) -> SiConfig:
        return SiConfig(enabled=self.si_enabled, residual_factor=self.si_residual_factor)

    @property
    def selection_scheme(self) -> SelectionScheme:
        return SelectionScheme(self.scheme)

    @property
    def n0w_w(self) -> float:
        return dbm_to_watts(self.n0_dbm_hz) * self.w_hz

    @property
    def pmax_user_w(self) -> float:
        return dbm_to_watts(self.pmax_user_dbm)

    @property
    def pmax_bs_w(self) -> float:
        return dbm_to_watts(self.pmax_bs_dbm)

    @property
    def budgets(self) -> Budgets:
        return Budgets(
            pmax_coop=self.pmax_user_w,
            pmax_nc=self.pmax_user_w,
            rmin_coop=self.rmin_coop,
            rmin_nc=self.rmin_nc,
        )


@dataclass(eq=False)
class TrialResult:
    sum_rate: float
    per_user_rates: np.ndarray
    selection: SelectionResult | None
    assignment: Assignment | None
    report: SolverReport | None
    failed: bool = False
    error: str | None = None


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Independent, reproducible stream per (seed, trial)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(trial_index,)))


def per_user_rates(
    assignment: Assignment,
    powers: PowerProfile,
    gains,
    bs: BsPowerPolicy,
    k1: int,
    k2: int,
    mode: SinrMode = SinrMode.EXACT,
) -> np.ndarray:
    """Rate per user: far users first, then near users (bit/s/Hz)."""
    rates = np.zeros(k1 + k2)
    for k, m, i, j in zip(*np.nonzero(assignment.rho)):
        g = sinr_cooperative(
            powers.p_coop_user[k, m, i],
            powers.p_coop_relay[m, j],
            bs.p_b[j],
            gains.a[k, m, i],
            gains.b2[m, j],
            gains.c_si[j],
            mode,
        )
        rates[k] += rate_from_sinr(g)
    for m, i in zip(*np.nonzero(assignment.sigma1)):
        g = sinr_noncooperative(powers.p_nc1[m, i], gains.b1[m, i], bs.p_b[i], gains.c_si[i])
        rates[k1 + m] += rate_from_sinr(g)
    for m, j in zip(*np.nonzero(assignment.sigma2)):
        g = sinr_noncooperative(powers.p_nc2[m, j], gains.b2[m, j], bs.p_b[j], gains.c_si[j])
        rates[k1 + m] += rate_from_sinr(g)
    return rates


def run_trial(config: ScenarioConfig, trial_index: int) -> TrialResult:
    """Execute the full pipeline once; errors mark the trial failed."""
    rng = trial_rng(config.seed, trial_index)
    try:
        topology = sample_topology(rng, config.geometry, config.k1, config.k2)
        realization = make_realization(topology, config.n, config.si, config.n0w_w, rng)
        gains = normalized_gains(realization, topology)
        bs = BsPowerPolicy.uniform(config.pmax_bs_w, config.n)
        provisional = ProvisionalPowers.equal_split(config.pmax_user_w, config.pmax_user_w, config.n)
        selection = select_all(
            config.selection_scheme, topology, gains, provisional, bs, exclusive=config.exclusive_relays
        )
        matrix = build_pair_matrix(selection, gains, provisional, bs, mode=SinrMode.EXACT)
        pair_of = munkres(matrix.value)
        required_coop = set(range(config.k1)) if config.rmin_coop > 0.0 else set()
        required_nc = set(selection.non_relay_users) if config.rmin_nc > 0.0 else set()
        repair_for_qos(matrix, pair_of, required_coop, required_nc)
        assignment = finalize_assignment(matrix, pair_of, config.k1, config.k2)
        budgets = config.budgets
        if config.pmax_user_w == 0.0:
            # nothing to optimize: all user powers are pinned at zero
            profile = PowerProfile.zeros(config.k1, config.k2, config.n)
            relaxed = bool(
                (budgets.rmin_coop > 0.0 and config.k1 > 0)
                or (budgets.rmin_nc > 0.0 and selection.non_relay_users)
            )
            report = SolverReport(
                objective=0.0, iterations=0, kkt_residual=0.0, feasible=True, qos_relaxed=relaxed
            )
        else:
            profile, report = solve(assignment, gains, bs, budgets, mode=SinrMode.APPROXIMATE)
            if budgets.rmin_nc > 0.0 and not report.qos_relaxed:
                # the solver cannot tell an idle direct user from a relaying
                # one, so the unserved-direct check happens here
                for m in selection.non_relay_users:
                    if assignment.sigma1[m].sum() == 0 and assignment.sigma2[m].sum() == 0:
                        report = dataclasses.replace(report, qos_relaxed=True)
                        break
        sum_rate = total_sum_rate(assignment, profile, gains, bs, mode=SinrMode.EXACT)
        rates = per_user_rates(assignment, profile, gains, bs, config.k1, config.k2)
        return TrialResult(
            sum_rate=sum_rate,
            per_user_rates=rates,
            selection=selection,
            assignment=assignment,
            report=report,
        )
    except Exception as exc:  # noqa: BLE001 - a failed trial must not kill the sweep
        return TrialResult(
            sum_rate=math.nan,
            per_user_rates=np.full(config.k1 + config.k2, math.nan),
            selection=None,
            assignment=None,
            report=None,
            failed=True,
            error=f"{type(exc).__name__}: {exc}",
        )


@dataclass(frozen=True)
class SweepPoint:
    axis: object
    series: str
    mean_sumrate_bps_hz: float
    stderr: float
    trials: int
    failed_trials: int
    qos_relaxed_trials: int


@dataclass(eq=False)
class SweepResult:
    axis_name: str
    points: list[SweepPoint]

    def series_names(self) -> list[str]:
        seen: dict[str, None] = {}
        for p in self.points:
            seen.setdefault(p.series, None)
        return list(seen)


def run_point(config: ScenarioConfig) -> tuple[float, float, int, int, int]:
    """All trials of one grid point: (mean, stderr, trials, failed, qos_relaxed).

    Failed trials are excluded from the mean but counted; the mean of zero
    successful trials is NaN.
    """
    values = []
    failed = 0
    qos_relaxed = 0
    for t in range(config.trials):
        result = run_trial(config, t)
        if result.failed:
            failed += 1
            continue
        values.append(result.sum_rate)
        if result.report is not None and result.report.qos_relaxed:
            qos_relaxed += 1
    if not values:
        return math.nan, math.nan, config.trials, failed, qos_relaxed
    arr = np.array(values)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return mean, stderr, config.trials, failed, qos_relaxed


def _point_configs(
    config: ScenarioConfig, axis_name: str, axis_values: list, series: list[tuple[str, dict]]
) -> list[tuple[object, str, ScenarioConfig]]:
    out = []
    for axis_value in axis_values:
        for label, overrides in series:
            cfg = dataclasses.replace(config, **overrides, **{axis_name: axis_value})
            out.append((axis_value, label, cfg))
    return out


def run_sweep(
    config: ScenarioConfig,
    axis_name: str,
    axis_values: list,
    series: list[tuple[str, dict]] | None = None,
    workers: int = 1,
) -> SweepResult:
    """Aggregate run_point over an (axis x series) grid.

    Every point reuses trial indices 0..trials-1 with the same base seed, so
    per-trial random streams are common across points wherever the draw
    sequence coincides. Results are reduced in grid order, making worker
    count irrelevant to the output bits.
    """
    if not axis_values:
        raise ValueError("axis_values must be non-empty")
    series = series or [("default", {})]
    grid = _point_configs(config, axis_name, axis_values, series)
    configs = [cfg for _, _, cfg in grid]
    if workers > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(grid))) as pool:
            stats = list(pool.map(run_point, configs))
    else:
        stats = [run_point(cfg) for cfg in configs]
    points = [
        SweepPoint(
            axis=axis_value,
            series=label,
            mean_sumrate_bps_hz=mean,
            stderr=stderr,
            trials=trials,
            failed_trials=failed,
            qos_relaxed_trials=qos,
        )
        for (axis_value, label, _), (mean, stderr, trials, failed, qos) in zip(grid, stats)
    ]
    return SweepResult(axis_name=axis_name, points=points)
