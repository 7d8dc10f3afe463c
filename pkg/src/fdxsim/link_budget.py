"""Noise-normalized link gains, SINR expressions, and spectral efficiencies.

The two-slot cooperative link (far user -> relay in slot 1, amplify-and-
forward relay -> BS in slot 2) and the direct near-user link share one set of
noise-normalized gains:

    a = l(user, relay) |h|^2 / (N0 W)      first hop, per subcarrier
    b = l(relay) |g|^2 / (N0 W)            second hop / direct, per slot
    c_si = |h_si|^2 / (N0 W)               BS self-interference, per subcarrier

With x the first-hop power, y the relay power and z the BS downlink power on
the paired subcarrier, the cooperative end-to-end SINR is

    exact:        x y a b / (1 + y b + x a + z c_si + z c_si x a)
    approximate:  x y a b / (y b + x a + z c_si x a)

The approximate form drops the two constant terms; it upper-bounds the exact
value and is jointly concave in (x, y), which is what the power solver relies
on. Rates are half-slot spectral efficiencies 0.5 log2(1 + SINR).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from .channel import ChannelRealization
from .geometry import Topology, relay_bs_path_loss, user_relay_path_loss

if TYPE_CHECKING:  # pragma: no cover - types only, avoids import cycles
    from .assignment import Assignment
    from .power_allocation import PowerProfile

LN2 = math.log(2.0)


class SinrMode(Enum):
    EXACT = "exact"
    APPROXIMATE = "approximate"


@dataclass(eq=False)
class NormalizedGains:
    """Noise-normalized power gains for one trial.

    a:    (k1, k2, n) first hop
    b1:   (k2, n) near user -> BS, slot 1
    b2:   (k2, n) near user -> BS, slot 2
    c_si: (n,) BS self-interference
    """

    a: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    c_si: np.ndarray

    @property
    def n_subcarriers(self) -> int:
        return self.c_si.shape[0]

    @property
    def k1(self) -> int:
        return self.a.shape[0]

    @property
    def k2(self) -> int:
        return self.a.shape[1]


@dataclass(frozen=True)
class BsPowerPolicy:
    """Fixed BS downlink power per subcarrier (never optimized)."""

    p_b: np.ndarray

    @classmethod
    def uniform(cls, total_w: float, n_subcarriers: int) -> "BsPowerPolicy":
        if total_w < 0.0:
            raise ValueError(f"BS power must be >= 0, got {total_w}")
        return cls(p_b=np.full(n_subcarriers, total_w / n_subcarriers))


@dataclass(frozen=True)
class ProvisionalPowers:
    """Equal-split powers used before any allocation exists (selection and
    pair-matrix scoring)."""

    coop_first_hop_w: float
    coop_second_hop_w: float
    nc_per_subcarrier_w: float

    @classmethod
    def equal_split(cls, pmax_coop_w: float, pmax_nc_w: float, n_subcarriers: int) -> "ProvisionalPowers":
        return cls(
            coop_first_hop_w=pmax_coop_w / n_subcarriers,
            coop_second_hop_w=pmax_coop_w / n_subcarriers,
            nc_per_subcarrier_w=pmax_nc_w / n_subcarriers,
        )


def normalized_gains(realization: ChannelRealization, topology: Topology) -> NormalizedGains:
    """Combine path loss and fading into noise-normalized gains."""
    n0w = realization.n0w
    l_ur = user_relay_path_loss(topology)  # (k1, k2)
    l_rb = relay_bs_path_loss(topology)  # (k2,)
    a = l_ur[:, :, None] * np.abs(realization.h) ** 2 / n0w
    b1 = l_rb[:, None] * np.abs(realization.g1) ** 2 / n0w
    b2 = l_rb[:, None] * np.abs(realization.g2) ** 2 / n0w
    c_si = np.abs(realization.h_si) ** 2 / n0w
    return NormalizedGains(a=a, b1=b1, b2=b2, c_si=c_si)


def amplification_factor(p_user: float, channel_power_gain: float, n0w: float) -> float:
    """Amplify-and-forward gain 1/sqrt(p * l |h|^2 + N0 W).

    channel_power_gain is the un-normalized received power gain l |h|^2.
    Normalizes the relay input to unit average power before retransmission.
    """
    if p_user < 0.0 or channel_power_gain < 0.0:
        raise ValueError("powers and gains must be >= 0")
    if n0w <= 0.0:
        raise ValueError("noise power must be positive")
    return 1.0 / math.sqrt(p_user * channel_power_gain + n0w)


def sinr_cooperative(
    x: float,
    y: float,
    z: float,
    a: float,
    b: float,
    c_gamma: float,
    mode: SinrMode = SinrMode.EXACT,
) -> float:
    """End-to-end SINR of the two-hop amplify-and-forward link.

    x: far-user power (slot 1), y: relay power (slot 2), z: BS downlink power
    on the paired subcarrier, a/b: normalized hop gains, c_gamma: normalized
    self-interference gain.
    """
    num = x * y * a * b
    if mode is SinrMode.EXACT:
        den = 1.0 + y * b + x * a + z * c_gamma + z * c_gamma * x * a
    else:
        den = y * b + x * a + z * c_gamma * x * a
        if den == 0.0:
            # all powers/gains zero: the link carries nothing
            return 0.0
    return num / den


def sinr_noncooperative(p: float, b: float, z: float, c_gamma: float) -> float:
    """Direct-link SINR under BS self-interference."""
    return p * b / (1.0 + z * c_gamma)


def rate_from_sinr(sinr: float) -> float:
    """Half-slot spectral efficiency 0.5 log2(1 + SINR) in bit/s/Hz."""
    if sinr < 0.0:
        raise ValueError(f"SINR must be >= 0, got {sinr}")
    return 0.5 * math.log1p(sinr) / LN2


def total_sum_rate(
    assignment: "Assignment",
    powers: "PowerProfile",
    gains: NormalizedGains,
    bs: BsPowerPolicy,
    mode: SinrMode = SinrMode.EXACT,
) -> float:
    """Weighted sum of all scheduled link rates.

    Cooperative cells contribute one two-hop rate on their subcarrier pair;
    non-cooperative users contribute one direct rate per slot assignment.
    """
    total = 0.0
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
        total += rate_from_sinr(g)
    for m, i in zip(*np.nonzero(assignment.sigma1)):
        g = sinr_noncooperative(powers.p_nc1[m, i], gains.b1[m, i], bs.p_b[i], gains.c_si[i])
        total += rate_from_sinr(g)
    for m, j in zip(*np.nonzero(assignment.sigma2)):
        g = sinr_noncooperative(powers.p_nc2[m, j], gains.b2[m, j], bs.p_b[j], gains.c_si[j])
        total += rate_from_sinr(g)
    return total
