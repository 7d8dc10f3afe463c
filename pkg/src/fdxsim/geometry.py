"""Cell geometry: polar node placement and singular path loss.

The base station sits at the origin of a circular cell. Near users (relay
candidates) live inside radius r1, far users in the annulus [r1, r2). Radii
are drawn uniformly in r (not uniformly in area), matching the radial
density model this simulator is built around.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Nodes closer than this to the BS or to each other get resampled.
MIN_SEPARATION_M = 1.0


@dataclass(frozen=True)
class PolarPoint:
    """Position in polar coordinates relative to the BS at the origin."""

    r: float
    theta: float

    def __post_init__(self):
        if not (self.r >= 0.0 and math.isfinite(self.r)):
            raise ValueError(f"radius must be finite and >= 0, got {self.r}")
        if not (0.0 <= self.theta < TWO_PI):
            raise ValueError(f"theta must lie in [0, 2*pi), got {self.theta}")


@dataclass(frozen=True)
class CellGeometry:
    """Cell radii in meters and the path loss exponent."""

    r1: float
    r2: float
    alpha: float

    def __post_init__(self):
        if not (0.0 < self.r1 < self.r2):
            raise ValueError(f"need 0 < r1 < r2, got r1={self.r1}, r2={self.r2}")
        if not (2.0 <= self.alpha <= 6.0):
            raise ValueError(f"path loss exponent must be in [2, 6], got {self.alpha}")


@dataclass(frozen=True)
class Topology:
    """One realization of node positions.

    relays: near users (relay candidates), all with r < r1.
    users: far users, all with r1 <= r < r2.
    """

    relays: tuple[PolarPoint, ...]
    users: tuple[PolarPoint, ...]
    geometry: CellGeometry

    def __post_init__(self):
        for p in self.relays:
            if not p.r < self.geometry.r1:
                raise ValueError(f"relay at r={p.r} outside [0, r1={self.geometry.r1})")
        for p in self.users:
            if not (self.geometry.r1 <= p.r < self.geometry.r2):
                raise ValueError(
                    f"user at r={p.r} outside [r1={self.geometry.r1}, r2={self.geometry.r2})"
                )


def sample_relay_position(rng: np.random.Generator, geometry: CellGeometry) -> PolarPoint:
    """Draw a near-user position: r ~ U[0, r1), theta ~ U[0, 2*pi)."""
    return PolarPoint(rng.uniform(0.0, geometry.r1), rng.uniform(0.0, TWO_PI))


def sample_user_position(rng: np.random.Generator, geometry: CellGeometry) -> PolarPoint:
    """Draw a far-user position: r ~ U[r1, r2), theta ~ U[0, 2*pi)."""
    return PolarPoint(rng.uniform(geometry.r1, geometry.r2), rng.uniform(0.0, TWO_PI))


def euclidean_distance(p1: PolarPoint, p2: PolarPoint) -> float:
    """Distance between two polar points (law of cosines)."""
    d2 = p1.r * p1.r + p2.r * p2.r - 2.0 * p1.r * p2.r * math.cos(p1.theta - p2.theta)
    # d2 can round slightly negative for near-coincident points
    return math.sqrt(max(d2, 0.0))


def path_loss_to_bs(p: PolarPoint, alpha: float) -> float:
    """Singular path loss d^(-alpha) to the BS at the origin."""
    if p.r == 0.0:
        raise ValueError("path loss is singular at the origin")
    return p.r ** (-alpha)


def path_loss_between(p1: PolarPoint, p2: PolarPoint, alpha: float) -> float:
    """Singular path loss d^(-alpha) between two nodes."""
    d = euclidean_distance(p1, p2)
    if d == 0.0:
        raise ValueError("path loss is singular for coincident nodes")
    return d ** (-alpha)


def sample_topology(
    rng: np.random.Generator,
    geometry: CellGeometry,
    k1: int,
    k2: int,
    min_separation: float = MIN_SEPARATION_M,
    max_attempts: int = 10_000,
) -> Topology:
    """Sample k2 relay candidates and k1 far users with a separation guard.

    Positions closer than min_separation to the BS or to any already placed
    node are rejected and redrawn, which keeps the singular path loss finite
    without changing the radial law in any measurable way at default radii.
    """
    if k1 < 1 or k2 < 1:
        raise ValueError(f"need at least one user per group, got k1={k1}, k2={k2}")
    placed: list[PolarPoint] = []

    def place(sampler) -> PolarPoint:
        for _ in range(max_attempts):
            p = sampler(rng, geometry)
            if p.r < min_separation:
                continue
            if any(euclidean_distance(p, q) < min_separation for q in placed):
                continue
            placed.append(p)
            return p
        raise RuntimeError("could not place a node respecting the separation guard")

    relays = tuple(place(sample_relay_position) for _ in range(k2))
    users = tuple(place(sample_user_position) for _ in range(k1))
    return Topology(relays=relays, users=users, geometry=geometry)


def user_relay_distances(topology: Topology) -> np.ndarray:
    """(k1, k2) matrix of far-user to relay distances."""
    k1, k2 = len(topology.users), len(topology.relays)
    d = np.empty((k1, k2))
    for k, u in enumerate(topology.users):
        for m, r in enumerate(topology.relays):
            d[k, m] = euclidean_distance(u, r)
    return d


def relay_bs_distances(topology: Topology) -> np.ndarray:
    """(k2,) vector of relay to BS distances."""
    return np.array([p.r for p in topology.relays])


def user_relay_path_loss(topology: Topology) -> np.ndarray:
    """(k1, k2) matrix of far-user to relay path losses."""
    d = user_relay_distances(topology)
    if np.any(d == 0.0):
        raise ValueError("path loss is singular for coincident nodes")
    return d ** (-topology.geometry.alpha)


def relay_bs_path_loss(topology: Topology) -> np.ndarray:
    """(k2,) vector of relay to BS path losses."""
    return np.array([path_loss_to_bs(p, topology.geometry.alpha) for p in topology.relays])
