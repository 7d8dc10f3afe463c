"""Continuous power allocation over a fixed subcarrier schedule.

With the scheduling indicators frozen, the sum rate decomposes into
independent groups: each cooperative pair (far user + relay) shares one
power budget across its assigned subcarrier pairs, and each direct user
has one budget per time slot. In the simplified (approximate) SINR form
every group objective is concave — certified here by closed-form Hessians —
so each group is solved exactly with a logarithmic-barrier Newton ascent.

Rate floors never bind at an interior optimum: each floor's left-hand side
is precisely its own group's objective share, which the unconstrained
stage already maximizes. A floor is therefore either satisfied by the
optimum or unsatisfiable; unsatisfiable instances are re-reported with
``qos_relaxed=True`` instead of aborting, so Monte Carlo sweeps complete.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .link_budget import LN2, BsPowerPolicy, NormalizedGains, SinrMode

if TYPE_CHECKING:  # pragma: no cover
    from .assignment import Assignment

MU_INITIAL = 1.0
MU_FINAL = 1e-7
MU_SHRINK = 0.1
ARMIJO_FACTOR = 0.5
ARMIJO_SLOPE = 1e-4
INNER_TOL = 1e-7
MAX_INNER_STEPS = 60
MAX_BACKTRACKS = 60
BUDGET_RTOL = 1e-8
QOS_ATOL = 1e-6


class InfeasibleError(ValueError):
    """A positive rate floor can never be met with the given budget."""


@dataclass(frozen=True)
class Budgets:
    """Per-group power budgets (watts) and rate floors (bit/s/Hz)."""

    pmax_coop: float
    pmax_nc: float
    rmin_coop: float = 0.0
    rmin_nc: float = 0.0

    def __post_init__(self) -> None:
        for name in ("pmax_coop", "pmax_nc", "rmin_coop", "rmin_nc"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass(eq=False)
class PowerProfile:
    """Dense transmit powers, one slot per possible grant (watts).

    p_coop_user[k, m, i]: far user k's first-hop power toward relay m on
    slot-1 subcarrier i. p_coop_relay[m, j]: relay m's second-hop power on
    slot-2 subcarrier j. p_nc1[m, i] / p_nc2[m, j]: direct powers per slot.
    """

    p_coop_user: np.ndarray
    p_coop_relay: np.ndarray
    p_nc1: np.ndarray
    p_nc2: np.ndarray

    @classmethod
    def zeros(cls, k1: int, k2: int, n: int) -> "PowerProfile":
        return cls(
            p_coop_user=np.zeros((k1, k2, n)),
            p_coop_relay=np.zeros((k2, n)),
            p_nc1=np.zeros((k2, n)),
            p_nc2=np.zeros((k2, n)),
        )


@dataclass(frozen=True)
class SolverReport:
    objective: float
    iterations: int
    kkt_residual: float
    feasible: bool
    qos_relaxed: bool


# ---------------------------------------------------------------------------
# Concavity certificates (closed forms checked against numerical oracles)
# ---------------------------------------------------------------------------


def coop_hessian_closed_form(x: float, y: float, a: float, b: float, c: float) -> np.ndarray:
    """Hessian of the simplified relayed SINR f = a*b*x*y / (a*c*x + b*y).

    The matrix is rank one with non-positive trace, certifying joint
    concavity of f (hence of the relayed rate) in the two hop powers.
    """
    d = a * c * x + b * y
    if d <= 0.0:
        raise ValueError(f"degenerate denominator a*c*x + b*y = {d}; need > 0")
    s = 2.0 * a * a * b * b * c / d**3
    return np.array([[-s * y * y, s * x * y], [s * x * y, -s * x * x]])


def coop_hessian_eigenvalues(x: float, y: float, a: float, b: float, c: float) -> tuple[float, float]:
    """Eigenvalues {0, trace} of the rank-one Hessian above, both <= 0."""
    num = 2.0 * c * a * a * b * b * x * x + 2.0 * c * a * a * b * b * y * y
    den = a**3 * c**3 * x**3 + 3.0 * a * a * b * c * c * x * x * y + 3.0 * a * b * b * c * x * y * y + b**3 * y**3
    if den <= 0.0:
        raise ValueError(f"degenerate denominator (a*c*x + b*y)^3 = {den}; need > 0")
    return (0.0, -num / den)


def nc_hessian_and_eigenvalues(x: float, b: float, c: float, z: float) -> tuple[float, tuple[float, float]]:
    """Curvature of the direct-link rate log2(1 + b*x/(c*z + 1)) in x.

    Returns the scalar second derivative and its eigenvalue set {0, same
    value in simplified form}; the two expressions are algebraically
    identical and non-positive, certifying concavity.
    """
    beta = c * z + 1.0
    if beta <= 0.0:
        raise ValueError(f"interference term c*z + 1 = {beta}; need > 0")
    hessian = -(b * b) / (LN2 * (b * x / beta + 1.0) ** 2 * beta * beta)
    eigenvalue = -(b * b) / (LN2 * (b * x + beta) ** 2)
    return hessian, (0.0, eigenvalue)


# ---------------------------------------------------------------------------
# Variable groups: one independent concave subproblem each
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class CoopGroup:
    """One far user and its relay: variables [x_1, y_1, ..., x_C, y_C]."""

    far_user: int
    relay: int
    cells: list[tuple[int, int]]
    a: np.ndarray
    b: np.ndarray
    z: np.ndarray
    c_si: np.ndarray

    @property
    def n_vars(self) -> int:
        return 2 * len(self.cells)


@dataclass(eq=False)
class NcGroup:
    """One direct user in one slot: variables [p_1, ..., p_G]."""

    user: int
    slot: int
    subcarriers: list[int]
    b: np.ndarray
    z: np.ndarray
    c_si: np.ndarray

    @property
    def n_vars(self) -> int:
        return len(self.subcarriers)


def build_groups(
    assignment: "Assignment", gains: NormalizedGains, bs: BsPowerPolicy
) -> tuple[list[CoopGroup], list[NcGroup]]:
    """Split the scheduled links into independent budget groups.

    Canonical order (also the gradient layout): cooperative pairs by far
    user ascending, cells by slot-1 subcarrier ascending with (x, y)
    adjacent; then each direct user ascending, slot 1 before slot 2,
    subcarriers ascending.
    """
    coop_cells: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for k, m, i, j in zip(*np.nonzero(assignment.rho)):
        coop_cells.setdefault((int(k), int(m)), []).append((int(i), int(j)))
    coop_groups = []
    for (k, m), cells in sorted(coop_cells.items()):
        cells.sort()
        ii = np.array([i for i, _ in cells])
        jj = np.array([j for _, j in cells])
        coop_groups.append(
            CoopGroup(
                far_user=k,
                relay=m,
                cells=cells,
                a=gains.a[k, m, ii],
                b=gains.b2[m, jj],
                z=bs.p_b[jj],
                c_si=gains.c_si[jj],
            )
        )
    nc_groups = []
    for m in range(assignment.sigma1.shape[0]):
        for slot, sigma, bmat in ((1, assignment.sigma1, gains.b1), (2, assignment.sigma2, gains.b2)):
            subs = [int(i) for i in np.nonzero(sigma[m])[0]]
            if not subs:
                continue
            idx = np.array(subs)
            nc_groups.append(
                NcGroup(user=m, slot=slot, subcarriers=subs, b=bmat[m, idx], z=bs.p_b[idx], c_si=gains.c_si[idx])
            )
    return coop_groups, nc_groups


def _coop_value_grad(
    v: np.ndarray, g: CoopGroup, mode: SinrMode, with_hessian: bool = False, value_only: bool = False
) -> tuple[float, np.ndarray | None, np.ndarray | None]:
    """Group rate, gradient, and (optionally) block Hessian w.r.t. [x, y] pairs."""
    x = v[0::2]
    y = v[1::2]
    beta = 1.0 + g.z * g.c_si
    a_eff = g.a * beta  # coefficient of x in both SINR denominators
    num = g.a * g.b * x * y
    if mode is SinrMode.APPROXIMATE:
        den = a_eff * x + g.b * y
        live = den > 0.0
        gamma = np.divide(num, den, out=np.zeros_like(num), where=live)
        if value_only:
            return float(np.sum(0.5 * np.log1p(gamma) / LN2)), None, None
        d2 = np.where(live, den, 1.0) ** 2
        gamma_x = np.where(live, g.a * g.b**2 * y**2 / d2, 0.0)
        gamma_y = np.where(live, a_eff * g.a * g.b * x**2 / d2, 0.0)
        if with_hessian:
            d3 = np.where(live, den, 1.0) ** 3
            gamma_xx = np.where(live, -2.0 * a_eff * g.a * g.b**2 * y**2 / d3, 0.0)
            gamma_yy = np.where(live, -2.0 * a_eff * g.a * g.b**2 * x**2 / d3, 0.0)
            gamma_xy = np.where(live, 2.0 * a_eff * g.a * g.b**2 * x * y / d3, 0.0)
    else:
        den = beta + a_eff * x + g.b * y
        gamma = num / den
        if value_only:
            return float(np.sum(0.5 * np.log1p(gamma) / LN2)), None, None
        d2 = den**2
        gamma_x = g.a * g.b * y * (beta + g.b * y) / d2
        gamma_y = g.a * g.b * x * (beta + a_eff * x) / d2
        if with_hessian:
            d3 = den**3
            gamma_xx = -2.0 * a_eff * g.a * g.b * y * (beta + g.b * y) / d3
            gamma_yy = -2.0 * g.b * g.a * g.b * x * (beta + a_eff * x) / d3
            gamma_xy = g.a * g.b * (beta * den + 2.0 * a_eff * g.b * x * y) / d3
    value = float(np.sum(0.5 * np.log1p(gamma) / LN2))
    u = 1.0 / (2.0 * LN2 * (1.0 + gamma))
    grad = np.empty_like(v)
    if mode is SinrMode.APPROXIMATE:
        # at a (0, 0) corner the simplified form's slope depends on the
        # approach direction; use the equal-power ray, matching how
        # provisional powers enter a link
        corner = (x == 0.0) & (y == 0.0)
        if np.any(corner):
            denom0 = np.where(a_eff + g.b > 0.0, (a_eff + g.b) ** 2, 1.0)
            gamma_x = np.where(corner, g.a * g.b**2 / denom0, gamma_x)
            gamma_y = np.where(corner, a_eff * g.a * g.b / denom0, gamma_y)
    grad[0::2] = u * gamma_x
    grad[1::2] = u * gamma_y
    if not with_hessian:
        return value, grad, None
    hess = np.zeros((v.size, v.size))
    w = 1.0 / (2.0 * LN2)
    one_p = 1.0 + gamma
    hxx = w * (gamma_xx / one_p - (gamma_x / one_p) ** 2)
    hyy = w * (gamma_yy / one_p - (gamma_y / one_p) ** 2)
    hxy = w * (gamma_xy / one_p - gamma_x * gamma_y / one_p**2)
    for c in range(len(g.cells)):
        hess[2 * c, 2 * c] = hxx[c]
        hess[2 * c + 1, 2 * c + 1] = hyy[c]
        hess[2 * c, 2 * c + 1] = hess[2 * c + 1, 2 * c] = hxy[c]
    return value, grad, hess


def _nc_value_grad(
    v: np.ndarray, g: NcGroup, with_hessian: bool = False, value_only: bool = False
) -> tuple[float, np.ndarray | None, np.ndarray | None]:
    e = g.b / (1.0 + g.z * g.c_si)
    value = float(np.sum(0.5 * np.log1p(e * v) / LN2))
    if value_only:
        return value, None, None
    one_p = 1.0 + e * v
    grad = e / (2.0 * LN2 * one_p)
    if not with_hessian:
        return value, grad, None
    hess = np.diag(-(e * e) / (2.0 * LN2 * one_p * one_p))
    return value, grad, hess


def _group_value_grad(v, group, mode, with_hessian=False, value_only=False):
    if isinstance(group, CoopGroup):
        return _coop_value_grad(v, group, mode, with_hessian, value_only)
    return _nc_value_grad(v, group, with_hessian, value_only)


def _extract(powers: PowerProfile, group) -> np.ndarray:
    if isinstance(group, CoopGroup):
        v = np.empty(group.n_vars)
        for c, (i, j) in enumerate(group.cells):
            v[2 * c] = powers.p_coop_user[group.far_user, group.relay, i]
            v[2 * c + 1] = powers.p_coop_relay[group.relay, j]
        return v
    arr = powers.p_nc1 if group.slot == 1 else powers.p_nc2
    return arr[group.user, group.subcarriers].astype(float)


def _inject(powers: PowerProfile, group, v: np.ndarray) -> None:
    if isinstance(group, CoopGroup):
        for c, (i, j) in enumerate(group.cells):
            powers.p_coop_user[group.far_user, group.relay, i] = v[2 * c]
            powers.p_coop_relay[group.relay, j] = v[2 * c + 1]
        return
    arr = powers.p_nc1 if group.slot == 1 else powers.p_nc2
    arr[group.user, group.subcarriers] = v


def objective_and_gradient(
    powers: PowerProfile,
    assignment: "Assignment",
    gains: NormalizedGains,
    bs: BsPowerPolicy,
    mode: SinrMode = SinrMode.APPROXIMATE,
) -> tuple[float, np.ndarray]:
    """Scheduled sum rate and its gradient, one entry per active power.

    Gradient layout follows build_groups order; the analytic entries match
    central finite differences to high accuracy on interior points.
    """
    coop_groups, nc_groups = build_groups(assignment, gains, bs)
    value = 0.0
    parts = []
    for group in [*coop_groups, *nc_groups]:
        v = _extract(powers, group)
        if np.any(v < 0.0):
            raise ValueError("powers must be >= 0")
        gv, grad, _ = _group_value_grad(v, group, mode)
        value += gv
        parts.append(grad)
    gradient = np.concatenate(parts) if parts else np.zeros(0)
    return value, gradient


def equal_power_baseline(assignment: "Assignment", budgets: Budgets) -> PowerProfile:
    """Split each budget uniformly over its group's active subcarriers.

    Cooperative budgets go half to the first hop and half to the second on
    every assigned pair, so every budget is met with equality and the
    profile is always feasible.
    """
    k1, k2, n, _ = assignment.rho.shape
    profile = PowerProfile.zeros(k1, k2, n)
    for k, m, i, j in zip(*np.nonzero(assignment.rho)):
        n_cells = int(assignment.rho[k, m].sum())
        share = budgets.pmax_coop / (2.0 * n_cells)
        profile.p_coop_user[k, m, i] = share
        profile.p_coop_relay[m, j] = share
    for m in range(k2):
        g1 = int(assignment.sigma1[m].sum())
        if g1:
            profile.p_nc1[m, assignment.sigma1[m] > 0] = budgets.pmax_nc / g1
        g2 = int(assignment.sigma2[m].sum())
        if g2:
            profile.p_nc2[m, assignment.sigma2[m] > 0] = budgets.pmax_nc / g2
    return profile


# ---------------------------------------------------------------------------
# Barrier solver
# ---------------------------------------------------------------------------


def _barrier_ascent(v0: np.ndarray, budget: float, group, mode: SinrMode) -> tuple[np.ndarray, int, float]:
    """Maximize the group rate s.t. v >= 0, sum(v) <= budget.

    Logarithmic barrier with a decreasing parameter; Newton inner steps
    with a backtracking line search, gradient-direction fallback. Returns
    (solution, inner iterations, final gradient norm of the barrier
    objective). The solution is then scaled onto the budget boundary,
    which never decreases any rate.
    """
    v = v0.copy()
    iterations = 0
    kkt = math.inf

    def phi_value(vv: np.ndarray, mu: float) -> float:
        slack = budget - vv.sum()
        if slack <= 0.0 or np.any(vv <= 0.0):
            return -math.inf
        val, _, _ = _group_value_grad(vv, group, mode, value_only=True)
        return val + mu * (float(np.sum(np.log(vv))) + math.log(slack))

    mu = MU_INITIAL
    while True:
        stage_tol = INNER_TOL if mu <= MU_FINAL else max(1e-6, mu * 1e-2)
        prev_kkt = math.inf
        neutral = False
        for _ in range(MAX_INNER_STEPS):
            slack = budget - v.sum()
            val, grad_r, hess_r = _group_value_grad(v, group, mode, with_hessian=True)
            grad = grad_r + mu / v - (mu / slack)
            kkt = float(np.linalg.norm(grad))
            if kkt <= stage_tol:
                break
            if neutral and kkt >= prev_kkt:
                # phi-neutral stepping stopped contracting the gradient
                break
            prev_kkt = kkt
            hess = hess_r - np.diag(mu / v**2) - (mu / slack**2)
            try:
                step = np.linalg.solve(hess, -grad)
            except np.linalg.LinAlgError:
                step = grad.copy()
            if float(step @ grad) <= 0.0:
                step = grad.copy()
            # largest multiple keeping the iterate strictly interior
            alpha_max = math.inf
            neg = step < 0.0
            if np.any(neg):
                alpha_max = float(np.min(v[neg] / -step[neg]))
            ascent = float(step.sum())
            if ascent > 0.0:
                alpha_max = min(alpha_max, slack / ascent)
            alpha = min(1.0, 0.99 * alpha_max)
            phi0 = val + mu * (float(np.sum(np.log(v))) + math.log(slack))
            slope = float(grad @ step)
            # below this, a change in phi is indistinguishable from
            # round-off, so sufficient increase cannot be certified
            noise = 1e-13 * (1.0 + abs(phi0))
            accepted = False
            for _ in range(MAX_BACKTRACKS):
                trial = v + alpha * step
                phi_t = phi_value(trial, mu)
                if phi_t >= phi0 + ARMIJO_SLOPE * alpha * slope:
                    v = trial
                    accepted = True
                    neutral = False
                    break
                if alpha * slope <= noise and phi_t >= phi0 - noise:
                    # predicted gain is under the round-off floor of phi;
                    # take the damped Newton step anyway — near the
                    # optimum it still contracts the gradient, which the
                    # loop above verifies
                    v = trial
                    accepted = True
                    neutral = True
                    break
                alpha *= ARMIJO_FACTOR
            iterations += 1
            if not accepted:
                break
        if mu <= MU_FINAL:
            break
        mu = max(mu * MU_SHRINK, MU_FINAL)
    # close the barrier's interior gap: rates are nondecreasing in every
    # power, so inflating the group onto its budget boundary only helps
    v *= budget / v.sum()
    return v, iterations, kkt


def solve(
    assignment: "Assignment",
    gains: NormalizedGains,
    bs: BsPowerPolicy,
    budgets: Budgets,
    mode: SinrMode = SinrMode.APPROXIMATE,
) -> tuple[PowerProfile, SolverReport]:
    """Allocate all transmit powers for a fixed schedule.

    Per-group barrier Newton ascent (groups are independent), followed by a
    feasibility audit. Rate floors are checked against the optimized rates:
    a floor the optimum cannot reach makes the instance infeasible as
    posed, so it is reported with qos_relaxed=True rather than raised —
    except for the unsalvageable case of a zero budget against a positive
    floor, which is a configuration error.
    """
    coop_groups, nc_groups = build_groups(assignment, gains, bs)
    if coop_groups and budgets.pmax_coop == 0.0 and budgets.rmin_coop > 0.0:
        raise InfeasibleError("cooperative rate floor > 0 with zero cooperative budget")
    if nc_groups and budgets.pmax_nc == 0.0 and budgets.rmin_nc > 0.0:
        raise InfeasibleError("direct rate floor > 0 with zero per-slot budget")

    baseline = equal_power_baseline(assignment, budgets)
    k1, k2, n, _ = assignment.rho.shape
    profile = PowerProfile.zeros(k1, k2, n)
    iterations = 0
    kkt_sq = 0.0
    objective = 0.0
    group_rate: dict[tuple[str, int, int], float] = {}
    for group in [*coop_groups, *nc_groups]:
        budget = budgets.pmax_coop if isinstance(group, CoopGroup) else budgets.pmax_nc
        if budget == 0.0:
            v = np.zeros(group.n_vars)
        else:
            v0 = 0.99 * _extract(baseline, group)  # strictly interior start
            v, iters, kkt = _barrier_ascent(v0, budget, group, mode)
            iterations += iters
            kkt_sq += kkt * kkt
        _inject(profile, group, v)
        val, _, _ = _group_value_grad(v, group, mode)
        objective += val
        if isinstance(group, CoopGroup):
            group_rate[("coop", group.far_user, 0)] = group_rate.get(("coop", group.far_user, 0), 0.0) + val
        else:
            group_rate[("nc", group.user, group.slot)] = val

    qos_relaxed = False
    if budgets.rmin_coop > 0.0:
        served = {g.far_user for g in coop_groups}
        for k in range(k1):
            if group_rate.get(("coop", k, 0), 0.0) < budgets.rmin_coop - QOS_ATOL:
                qos_relaxed = True
        if len(served) < k1:
            qos_relaxed = True
    if budgets.rmin_nc > 0.0:
        for g in nc_groups:
            if group_rate[("nc", g.user, g.slot)] < budgets.rmin_nc - QOS_ATOL:
                qos_relaxed = True

    feasible = True
    for group in [*coop_groups, *nc_groups]:
        budget = budgets.pmax_coop if isinstance(group, CoopGroup) else budgets.pmax_nc
        v = _extract(profile, group)
        if np.any(v < 0.0) or v.sum() > budget * (1.0 + BUDGET_RTOL):
            feasible = False

    report = SolverReport(
        objective=objective,
        iterations=iterations,
        kkt_residual=math.sqrt(kkt_sq),
        feasible=feasible,
        qos_relaxed=qos_relaxed,
    )
    return profile, report
