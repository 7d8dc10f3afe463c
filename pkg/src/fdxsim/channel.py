"""Frequency-flat Rayleigh fading draws for one two-slot transmission frame.

All links are i.i.d. circularly symmetric complex Gaussian with unit variance
(real and imaginary parts N(0, 1/2) each), so |h|^2 ~ Exponential(1). The BS
self-interference channel is drawn per subcarrier and shared by both slots;
an optional residual factor scales its power to model partial cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Topology


@dataclass(frozen=True)
class SiConfig:
    """Self-interference channel switch.

    residual_factor scales E[|h_si|^2]; 1.0 means the raw unit-variance
    channel (no cancellation modeled), 0 < f < 1 models partial cancellation.
    """

    enabled: bool = False
    residual_factor: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.residual_factor <= 1.0):
            raise ValueError(f"residual_factor must be in [0, 1], got {self.residual_factor}")


@dataclass(eq=False)
class ChannelRealization:
    """Fading coefficients for one trial.

    h:    (k1, k2, n) far user -> relay, slot 1
    g1:   (k2, n) near user -> BS, slot 1
    g2:   (k2, n) near user -> BS, slot 2
    h_si: (n,) BS self-interference, shared by both slots
    n0w:  noise power per subcarrier in watts
    """

    h: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    h_si: np.ndarray
    n0w: float

    @property
    def n_subcarriers(self) -> int:
        return self.h_si.shape[0]


def draw_complex_gaussian(rng: np.random.Generator, size=None) -> np.ndarray | complex:
    """Unit-variance circularly symmetric complex Gaussian draw(s)."""
    scale = 1.0 / math.sqrt(2.0)
    re = rng.normal(0.0, scale, size)
    im = rng.normal(0.0, scale, size)
    return re + 1j * im


def make_realization(
    topology: Topology,
    n_subcarriers: int,
    si: SiConfig,
    n0w: float,
    rng: np.random.Generator,
) -> ChannelRealization:
    """Draw all fading coefficients for one trial.

    The self-interference vector is always drawn (then zeroed when disabled)
    so that runs differing only in the SI switch consume identical stream
    positions; that is what makes paired comparisons share every other draw.
    """
    if n_subcarriers < 1:
        raise ValueError(f"need at least one subcarrier, got {n_subcarriers}")
    if not (n0w > 0.0 and math.isfinite(n0w)):
        raise ValueError(f"noise power must be positive and finite, got {n0w}")
    k1, k2 = len(topology.users), len(topology.relays)
    h = draw_complex_gaussian(rng, (k1, k2, n_subcarriers))
    g1 = draw_complex_gaussian(rng, (k2, n_subcarriers))
    g2 = draw_complex_gaussian(rng, (k2, n_subcarriers))
    h_si = draw_complex_gaussian(rng, (n_subcarriers,))
    if si.enabled:
        h_si = h_si * math.sqrt(si.residual_factor)
    else:
        h_si = np.zeros(n_subcarriers, dtype=complex)
    return ChannelRealization(h=h, g1=g1, g2=g2, h_si=h_si, n0w=n0w)
