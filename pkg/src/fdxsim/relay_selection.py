"""Relay selection schemes for the two-hop cooperative uplink.

Two SINR-driven scores (with and without the self-interference term), a
harmonic-mean score over the per-hop received SNRs, and four pure-geometry
argmin rules. Scores are evaluated at equal-split provisional powers on each
diagonal subcarrier pair (i, i) and averaged, giving one scalar per
(far user, relay candidate) pair.

Selection runs per far user in ascending index order; in exclusive mode a
chosen relay leaves the candidate pool (sequential greedy). All ties break
to the lowest candidate index.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import Topology, relay_bs_distances, user_relay_distances
from .link_budget import BsPowerPolicy, NormalizedGains, ProvisionalPowers


class SelectionScheme(str, Enum):
    BEST_SINR_SI = "best-sinr-si"
    BEST_SINR_NOSI = "best-sinr-nosi"
    HARMONIC_MEAN = "harmonic-mean"
    SHORTEST_USER_DISTANCE = "shortest-user-distance"
    SHORTEST_TOTAL_DISTANCE = "shortest-total-distance"
    LEAST_LONGEST_HOP = "least-longest-hop"
    SHORTEST_SECOND_HOP = "shortest-second-hop"


DISTANCE_SCHEMES = frozenset(
    {
        SelectionScheme.SHORTEST_USER_DISTANCE,
        SelectionScheme.SHORTEST_TOTAL_DISTANCE,
        SelectionScheme.LEAST_LONGEST_HOP,
        SelectionScheme.SHORTEST_SECOND_HOP,
    }
)


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class SelectionResult:
    """relay_of maps far-user index -> relay index; is_relay flags near users
    serving as relays (they transmit no data of their own)."""

    relay_of: dict[int, int]
    is_relay: np.ndarray

    @property
    def non_relay_users(self) -> list[int]:
        return [m for m in range(len(self.is_relay)) if not self.is_relay[m]]


def score_sinr(
    k: int,
    m: int,
    i: int,
    gains: NormalizedGains,
    powers: ProvisionalPowers,
    bs: BsPowerPolicy,
    with_si: bool,
) -> float:
    """Simplified end-to-end SINR score on the diagonal pair (i, i).

    x a y b / (x a + y b [+ x z c_si a]); the bracketed self-interference
    term is kept only for the SI-aware variant.
    """
    x = powers.coop_first_hop_w
    y = powers.coop_second_hop_w
    xa = x * gains.a[k, m, i]
    yb = y * gains.b2[m, i]
    den = xa + yb
    if with_si:
        den += x * bs.p_b[i] * gains.c_si[i] * gains.a[k, m, i]
    if den == 0.0:
        return 0.0
    return xa * yb / den


def score_harmonic(
    k: int,
    m: int,
    i: int,
    gains: NormalizedGains,
    powers: ProvisionalPowers,
) -> float:
    """Harmonic mean 2/(1/(x a) + 1/(y b)) of the per-hop received SNRs."""
    u = powers.coop_first_hop_w * gains.a[k, m, i]
    v = powers.coop_second_hop_w * gains.b2[m, i]
    if u == 0.0 or v == 0.0:
        return 0.0
    return 2.0 / (1.0 / u + 1.0 / v)


def aggregate_score(
    scheme: SelectionScheme,
    k: int,
    m: int,
    gains: NormalizedGains,
    powers: ProvisionalPowers,
    bs: BsPowerPolicy,
) -> float:
    """Mean score over the diagonal subcarrier pairs (i, i)."""
    n = gains.n_subcarriers
    if scheme is SelectionScheme.BEST_SINR_SI:
        vals = [score_sinr(k, m, i, gains, powers, bs, with_si=True) for i in range(n)]
    elif scheme is SelectionScheme.BEST_SINR_NOSI:
        vals = [score_sinr(k, m, i, gains, powers, bs, with_si=False) for i in range(n)]
    elif scheme is SelectionScheme.HARMONIC_MEAN:
        vals = [score_harmonic(k, m, i, gains, powers) for i in range(n)]
    else:
        raise SelectionError(f"{scheme} is not a score-based scheme")
    return float(np.mean(vals))


def select_relay(
    scheme: SelectionScheme,
    k: int,
    topology: Topology,
    gains: NormalizedGains,
    powers: ProvisionalPowers,
    bs: BsPowerPolicy,
    available: list[int],
) -> int:
    """Pick the relay for far user k among the available candidates."""
    if not available:
        raise SelectionError("no relay candidates available")
    candidates = sorted(available)
    if scheme in DISTANCE_SCHEMES:
        d_u = user_relay_distances(topology)[k]
        d_r = relay_bs_distances(topology)
        if scheme is SelectionScheme.SHORTEST_USER_DISTANCE:
            key = {m: d_u[m] for m in candidates}
        elif scheme is SelectionScheme.SHORTEST_TOTAL_DISTANCE:
            key = {m: d_u[m] + d_r[m] for m in candidates}
        elif scheme is SelectionScheme.LEAST_LONGEST_HOP:
            key = {m: max(d_u[m], d_r[m]) for m in candidates}
        else:
            key = {m: d_r[m] for m in candidates}
        best = candidates[0]
        for m in candidates[1:]:
            if key[m] < key[best]:
                best = m
        return best
    best = candidates[0]
    best_score = aggregate_score(scheme, k, best, gains, powers, bs)
    for m in candidates[1:]:
        s = aggregate_score(scheme, k, m, gains, powers, bs)
        if s > best_score:
            best, best_score = m, s
    return best


def select_all(
    scheme: SelectionScheme,
    topology: Topology,
    gains: NormalizedGains,
    powers: ProvisionalPowers,
    bs: BsPowerPolicy,
    exclusive: bool = True,
) -> SelectionResult:
    """Assign one relay to every far user.

    Exclusive mode consumes candidates (sequential greedy in ascending far-
    user order) and requires k1 <= k2; non-exclusive mode lets one near user
    relay for several far users.
    """
    k1, k2 = len(topology.users), len(topology.relays)
    if exclusive and k1 > k2:
        raise SelectionError(f"exclusive selection needs k1 <= k2, got k1={k1}, k2={k2}")
    available = list(range(k2))
    relay_of: dict[int, int] = {}
    for k in range(k1):
        m = select_relay(scheme, k, topology, gains, powers, bs, available)
        relay_of[k] = m
        if exclusive:
            available.remove(m)
    is_relay = np.zeros(k2, dtype=bool)
    for m in relay_of.values():
        is_relay[m] = True
    return SelectionResult(relay_of=relay_of, is_relay=is_relay)
