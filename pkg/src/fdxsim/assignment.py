"""Subcarrier pairing: value matrix, optimal assignment, and indicators.

Each cell (i, j) pairs slot-1 subcarrier i with slot-2 subcarrier j. Its
value is the best rate any candidate can earn there at provisional powers:
either a cooperative candidate (far user k routed through its selected
relay, one two-hop rate) or a non-relaying near user (sum of its two direct
slot rates). The winner takes the whole cell.

The pairing itself is the permutation maximizing the total cell value,
found with the classic O(N^3) potentials algorithm. A repair pass then
guarantees every user holding a positive rate floor at least one cell
whenever a donor cell exists.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .link_budget import (
    BsPowerPolicy,
    NormalizedGains,
    ProvisionalPowers,
    SinrMode,
    rate_from_sinr,
    sinr_cooperative,
    sinr_noncooperative,
)
from .relay_selection import SelectionResult


@dataclass(frozen=True)
class CellWinner:
    """Winning candidate of one matrix cell."""

    kind: str  # "coop" | "nc"
    user: int  # far-user index for coop, near-user index for nc
    relay: int = -1  # relay index for coop cells


@dataclass(eq=False)
class PairValueMatrix:
    """Cell values, winners, and the per-candidate rate tensors behind them.

    value[i, j] is the winning rate of pair (i, j); winner_idx[i, j] indexes
    into candidates. cand_rates[c, i, j] keeps every candidate's rate so the
    repair pass can re-seat losers without re-deriving anything.
    """

    value: np.ndarray
    winner_idx: np.ndarray
    candidates: list[CellWinner]
    cand_rates: np.ndarray

    @property
    def n(self) -> int:
        return self.value.shape[0]

    def winner(self, i: int, j: int) -> CellWinner:
        return self.candidates[self.winner_idx[i, j]]


@dataclass(eq=False)
class Assignment:
    """Binary scheduling indicators.

    rho[k, m, i, j] = 1: far user k relays through m on pair (i, j).
    sigma1[m, i] = 1: near user m sends directly on subcarrier i in slot 1.
    sigma2[m, j] = 1: near user m sends directly on subcarrier j in slot 2.
    pair_of[i] = j records the chosen permutation.
    """

    rho: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    pair_of: np.ndarray

    @property
    def coop_cells(self) -> list[tuple[int, int, int, int]]:
        return [tuple(int(v) for v in idx) for idx in zip(*np.nonzero(self.rho))]

    @property
    def nc_cells(self) -> list[tuple[int, int, int]]:
        """(m, i, j) triples: slot-1 and slot-2 grants of one nc winner cell."""
        out = []
        for i, j in enumerate(self.pair_of):
            ms1 = np.nonzero(self.sigma1[:, i])[0]
            if ms1.size:
                out.append((int(ms1[0]), int(i), int(j)))
        return out


def build_pair_matrix(
    selection: SelectionResult,
    gains: NormalizedGains,
    powers: ProvisionalPowers,
    bs: BsPowerPolicy,
    mode: SinrMode = SinrMode.EXACT,
) -> PairValueMatrix:
    """Winner-takes-all value matrix over all subcarrier pairs.

    Candidate order is fixed (cooperative far users ascending, then
    non-relaying near users ascending) and argmax keeps the first best, so
    ties always resolve to the lowest candidate index.
    """
    n = gains.n_subcarriers
    candidates: list[CellWinner] = []
    layers = []
    x = powers.coop_first_hop_w
    y = powers.coop_second_hop_w
    for k in sorted(selection.relay_of):
        m = selection.relay_of[k]
        rates = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                g = sinr_cooperative(x, y, bs.p_b[j], gains.a[k, m, i], gains.b2[m, j], gains.c_si[j], mode)
                rates[i, j] = rate_from_sinr(g)
        candidates.append(CellWinner("coop", k, m))
        layers.append(rates)
    p = powers.nc_per_subcarrier_w
    for m in selection.non_relay_users:
        r1 = np.array(
            [rate_from_sinr(sinr_noncooperative(p, gains.b1[m, i], bs.p_b[i], gains.c_si[i])) for i in range(n)]
        )
        r2 = np.array(
            [rate_from_sinr(sinr_noncooperative(p, gains.b2[m, j], bs.p_b[j], gains.c_si[j])) for j in range(n)]
        )
        candidates.append(CellWinner("nc", m))
        layers.append(r1[:, None] + r2[None, :])
    if not candidates:
        raise ValueError("no candidates: no far users and every near user is relaying")
    cand_rates = np.stack(layers)
    winner_idx = np.argmax(cand_rates, axis=0)
    value = np.take_along_axis(cand_rates, winner_idx[None], axis=0)[0]
    return PairValueMatrix(value=value, winner_idx=winner_idx, candidates=candidates, cand_rates=cand_rates)


def munkres(matrix: np.ndarray, maximize: bool = True) -> np.ndarray:
    """Optimal square assignment, O(N^3) potentials algorithm.

    Returns pair_of with pair_of[i] = j. Deterministic for a given matrix.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"need a square matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix entries must be finite")
    n = matrix.shape[0]
    cost = (matrix.max() - matrix) if maximize else matrix.copy()

    INF = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    match = [0] * (n + 1)  # match[j] = row assigned to column j, 1-based
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = INF
            j1 = -1
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1][j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    pair_of = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        pair_of[match[j] - 1] = j - 1
    return pair_of


def repair_for_qos(
    matrix: PairValueMatrix,
    pair_of: np.ndarray,
    required_coop: set[int],
    required_nc: set[int],
) -> None:
    """Give every user with a rate floor at least one selected cell.

    Users are served in a fixed order (cooperative ascending, then direct
    ascending). An unserved user is swapped into the selected cell where the
    value loss is smallest, donors limited to winners holding two or more
    cells so a repair never strands another floor-holder. Mutates matrix
    winners/values in place.
    """
    cells = [(i, int(pair_of[i])) for i in range(matrix.n)]
    cand_index = {(c.kind, c.user): idx for idx, c in enumerate(matrix.candidates)}

    def serving() -> dict[tuple[str, int], list[tuple[int, int]]]:
        held: dict[tuple[str, int], list[tuple[int, int]]] = {}
        for i, j in cells:
            w = matrix.winner(i, j)
            held.setdefault((w.kind, w.user), []).append((i, j))
        return held

    wanted = [("coop", k) for k in sorted(required_coop)] + [("nc", m) for m in sorted(required_nc)]
    for key in wanted:
        if key not in cand_index:
            continue
        held = serving()
        if held.get(key):
            continue
        c_idx = cand_index[key]
        best_cell = None
        best_loss = None
        for i, j in cells:
            w = matrix.winner(i, j)
            if len(held[(w.kind, w.user)]) < 2:
                continue
            loss = matrix.value[i, j] - matrix.cand_rates[c_idx, i, j]
            if best_loss is None or loss < best_loss:
                best_loss = loss
                best_cell = (i, j)
        if best_cell is None:
            continue  # nothing to donate; the solver will flag the miss
        i, j = best_cell
        matrix.winner_idx[i, j] = c_idx
        matrix.value[i, j] = matrix.cand_rates[c_idx, i, j]


def finalize_assignment(matrix: PairValueMatrix, pair_of: np.ndarray, k1: int, k2: int) -> Assignment:
    """Turn cell winners along the chosen permutation into indicators."""
    n = matrix.n
    rho = np.zeros((k1, k2, n, n), dtype=np.int8)
    sigma1 = np.zeros((k2, n), dtype=np.int8)
    sigma2 = np.zeros((k2, n), dtype=np.int8)
    for i in range(n):
        j = int(pair_of[i])
        w = matrix.winner(i, j)
        if w.kind == "coop":
            rho[w.user, w.relay, i, j] = 1
        else:
            sigma1[w.user, i] = 1
            sigma2[w.user, j] = 1
    return Assignment(rho=rho, sigma1=sigma1, sigma2=sigma2, pair_of=np.array(pair_of, dtype=int))


def check_assignment(assignment: Assignment) -> bool:
    """Each slot-1 and slot-2 subcarrier is granted exactly once."""
    slot1 = assignment.rho.sum(axis=(0, 1, 3)) + assignment.sigma1.sum(axis=0)
    slot2 = assignment.rho.sum(axis=(0, 1, 2)) + assignment.sigma2.sum(axis=0)
    return bool(np.all(slot1 == 1) and np.all(slot2 == 1))
