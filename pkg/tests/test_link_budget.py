import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdxsim.channel import SiConfig, make_realization
from fdxsim.geometry import CellGeometry, path_loss_between, path_loss_to_bs, sample_topology
from fdxsim.link_budget import (
    BsPowerPolicy,
    ProvisionalPowers,
    SinrMode,
    amplification_factor,
    normalized_gains,
    rate_from_sinr,
    sinr_cooperative,
    sinr_noncooperative,
    total_sum_rate,
)

GEOM = CellGeometry(r1=100.0, r2=300.0, alpha=3.0)

pos = st.floats(1e-6, 1e6, allow_nan=False, allow_infinity=False)
nonneg = st.floats(0.0, 1e6, allow_nan=False, allow_infinity=False)


class TestNormalizedGains:
    def test_quotient_example(self):
        # |h|^2 = 1, l = 0.125, n0w = 0.25 -> gain 0.5
        assert 0.125 * 1.0 / 0.25 == pytest.approx(0.5)

    def test_cross_check_against_scalar_evaluator(self):
        topo = sample_topology(np.random.default_rng(3), GEOM, k1=2, k2=3)
        real = make_realization(topo, 4, SiConfig(enabled=True), 2.5e-17, np.random.default_rng(4))
        gains = normalized_gains(real, topo)
        assert gains.a.shape == (2, 3, 4)
        for k, u in enumerate(topo.users):
            for m, r in enumerate(topo.relays):
                l_ur = path_loss_between(u, r, GEOM.alpha)
                for i in range(4):
                    want = l_ur * abs(real.h[k, m, i]) ** 2 / real.n0w
                    assert gains.a[k, m, i] == pytest.approx(want, rel=1e-12)
        for m, r in enumerate(topo.relays):
            l_rb = path_loss_to_bs(r, GEOM.alpha)
            for i in range(4):
                assert gains.b1[m, i] == pytest.approx(l_rb * abs(real.g1[m, i]) ** 2 / real.n0w, rel=1e-12)
                assert gains.b2[m, i] == pytest.approx(l_rb * abs(real.g2[m, i]) ** 2 / real.n0w, rel=1e-12)
        for i in range(4):
            assert gains.c_si[i] == pytest.approx(abs(real.h_si[i]) ** 2 / real.n0w, rel=1e-12)

    def test_si_disabled_gives_zero_c(self):
        topo = sample_topology(np.random.default_rng(3), GEOM, k1=1, k2=1)
        real = make_realization(topo, 4, SiConfig(enabled=False), 1e-16, np.random.default_rng(4))
        gains = normalized_gains(real, topo)
        assert np.all(gains.c_si == 0.0)


class TestAmplification:
    def test_zero_input_power(self):
        assert amplification_factor(0.0, 5.0, 1.0) == pytest.approx(1.0, rel=1e-12)

    def test_received_power_three(self):
        # p * gain = 3, n0w = 1 -> 1/sqrt(4)
        assert amplification_factor(3.0, 1.0, 1.0) == pytest.approx(0.5, rel=1e-12)

    def test_definitional_identity(self):
        rng = np.random.default_rng(10)
        for _ in range(1000):
            p, g, n0w = rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(1e-3, 10)
            assert amplification_factor(p, g, n0w) == pytest.approx(1.0 / math.sqrt(p * g + n0w), rel=1e-12)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            amplification_factor(-1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            amplification_factor(1.0, 1.0, 0.0)


class TestCooperativeSinr:
    def test_exact_unit_inputs(self):
        # num 1, den 1 + 1 + 1 + 1 + 1
        assert sinr_cooperative(1, 1, 1, 1, 1, 1, SinrMode.EXACT) == pytest.approx(0.2, rel=1e-12)

    def test_approximate_unit_inputs(self):
        # num 1, den 1 + 1 + 1
        assert sinr_cooperative(1, 1, 1, 1, 1, 1, SinrMode.APPROXIMATE) == pytest.approx(1 / 3, rel=1e-12)

    def test_zero_power_kills_link(self):
        for mode in SinrMode:
            assert sinr_cooperative(0.0, 1.0, 1.0, 1.0, 1.0, 1.0, mode) == 0.0
            assert sinr_cooperative(1.0, 0.0, 1.0, 1.0, 1.0, 1.0, mode) == 0.0

    def test_approximate_zero_denominator_convention(self):
        assert sinr_cooperative(0.0, 0.0, 0.0, 1.0, 1.0, 0.0, SinrMode.APPROXIMATE) == 0.0

    @given(x=nonneg, y=nonneg, z=nonneg, a=nonneg, b=nonneg, c=nonneg)
    @settings(max_examples=200, deadline=None)
    def test_approximate_dominates_exact(self, x, y, z, a, b, c):
        exact = sinr_cooperative(x, y, z, a, b, c, SinrMode.EXACT)
        approx = sinr_cooperative(x, y, z, a, b, c, SinrMode.APPROXIMATE)
        assert approx >= exact

    def test_monotone_in_own_powers(self):
        rng = np.random.default_rng(11)
        for mode in SinrMode:
            for _ in range(2500):
                x, y, z, a, b, c = rng.uniform(0.01, 10, 6)
                base = sinr_cooperative(x, y, z, a, b, c, mode)
                assert sinr_cooperative(x * 1.1, y, z, a, b, c, mode) >= base - 1e-15
                assert sinr_cooperative(x, y * 1.1, z, a, b, c, mode) >= base - 1e-15

    def test_si_monotone_degradation(self):
        rng = np.random.default_rng(12)
        for _ in range(1000):
            x, y, z, a, b = rng.uniform(0.01, 10, 5)
            g0 = sinr_cooperative(x, y, z, a, b, 0.0, SinrMode.EXACT)
            g1 = sinr_cooperative(x, y, z, a, b, 1.0, SinrMode.EXACT)
            assert g0 >= g1


class TestNonCooperativeSinr:
    def test_no_si(self):
        assert sinr_noncooperative(1.0, 1.0, 1.0, 0.0) == pytest.approx(1.0, rel=1e-12)

    def test_with_si(self):
        # p b = 4, 1 + z c = 2
        assert sinr_noncooperative(2.0, 2.0, 1.0, 1.0) == pytest.approx(2.0, rel=1e-12)

    @given(p=nonneg, b=nonneg, z=nonneg, c=nonneg)
    @settings(max_examples=200, deadline=None)
    def test_nonnegative(self, p, b, z, c):
        assert sinr_noncooperative(p, b, z, c) >= 0.0


class TestRate:
    def test_values(self):
        assert rate_from_sinr(0.0) == 0.0
        assert rate_from_sinr(1.0) == pytest.approx(0.5, rel=1e-12)
        assert rate_from_sinr(3.0) == pytest.approx(1.0, rel=1e-12)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            rate_from_sinr(-0.5)

    @given(g1=nonneg, g2=nonneg)
    @settings(max_examples=200, deadline=None)
    def test_monotone(self, g1, g2):
        lo, hi = sorted([g1, g2])
        assert rate_from_sinr(lo) <= rate_from_sinr(hi)


class TestScaleConsistencyAtSinrLevel:
    def test_gains_times_s_powers_over_s(self):
        rng = np.random.default_rng(13)
        for _ in range(1000):
            x, y, z, a, b, c = rng.uniform(0.01, 10, 6)
            s = rng.uniform(0.1, 100)
            for mode in SinrMode:
                g0 = sinr_cooperative(x, y, z, a, b, c, mode)
                g1 = sinr_cooperative(x / s, y / s, z / s, a * s, b * s, c * s, mode)
                assert g1 == pytest.approx(g0, rel=1e-9)
            n0 = sinr_noncooperative(x, b, z, c)
            n1 = sinr_noncooperative(x / s, b * s, z / s, c * s)
            assert n1 == pytest.approx(n0, rel=1e-9)


def _single_link_instance(n=2, k1=1, k2=1):
    """Hand-built one-cooperative-cell instance plus dense profile arrays."""
    rho = np.zeros((k1, k2, n, n), dtype=np.int8)
    sigma1 = np.zeros((k2, n), dtype=np.int8)
    sigma2 = np.zeros((k2, n), dtype=np.int8)
    assignment = SimpleNamespace(rho=rho, sigma1=sigma1, sigma2=sigma2, pair_of=np.arange(n))
    powers = SimpleNamespace(
        p_coop_user=np.zeros((k1, k2, n)),
        p_coop_relay=np.zeros((k2, n)),
        p_nc1=np.zeros((k2, n)),
        p_nc2=np.zeros((k2, n)),
    )
    gains = SimpleNamespace(
        a=np.zeros((k1, k2, n)),
        b1=np.zeros((k2, n)),
        b2=np.zeros((k2, n)),
        c_si=np.zeros(n),
        n_subcarriers=n,
        k1=k1,
        k2=k2,
    )
    bs = BsPowerPolicy.uniform(0.0, n)
    return assignment, powers, gains, bs


class TestTotalSumRate:
    def test_single_cooperative_term(self):
        assignment, powers, gains, bs = _single_link_instance()
        assignment.rho[0, 0, 0, 1] = 1
        powers.p_coop_user[0, 0, 0] = 1.0
        powers.p_coop_relay[0, 1] = 1.0
        gains.a[0, 0, 0] = 6.0
        gains.b2[0, 1] = 6.0
        # approximate SINR = 36/12 = 3 -> rate 1.0
        assert total_sum_rate(assignment, powers, gains, bs, SinrMode.APPROXIMATE) == pytest.approx(1.0, rel=1e-12)

    def test_single_noncooperative_term_each_slot(self):
        assignment, powers, gains, bs = _single_link_instance()
        assignment.sigma1[0, 0] = 1
        assignment.sigma2[0, 1] = 1
        powers.p_nc1[0, 0] = 1.0
        powers.p_nc2[0, 1] = 1.0
        gains.b1[0, 0] = 3.0
        gains.b2[0, 1] = 1.0
        # slot-1 SINR 3 -> 1.0; slot-2 SINR 1 -> 0.5
        assert total_sum_rate(assignment, powers, gains, bs) == pytest.approx(1.5, rel=1e-12)

    def test_empty_assignment_is_zero(self):
        assignment, powers, gains, bs = _single_link_instance()
        assert total_sum_rate(assignment, powers, gains, bs) == 0.0

    def test_term_by_term_oracle_random_instance(self):
        rng = np.random.default_rng(21)
        k1, k2, n = 2, 3, 4
        assignment, powers, gains, bs = _single_link_instance(n=n, k1=k1, k2=k2)
        bs = BsPowerPolicy.uniform(1.0, n)
        gains.a[:] = rng.uniform(0.1, 10, (k1, k2, n))
        gains.b1[:] = rng.uniform(0.1, 10, (k2, n))
        gains.b2[:] = rng.uniform(0.1, 10, (k2, n))
        gains.c_si[:] = rng.uniform(0.0, 2, n)
        powers.p_coop_user[:] = rng.uniform(0, 1, (k1, k2, n))
        powers.p_coop_relay[:] = rng.uniform(0, 1, (k2, n))
        powers.p_nc1[:] = rng.uniform(0, 1, (k2, n))
        powers.p_nc2[:] = rng.uniform(0, 1, (k2, n))
        # cells: coop (0,0) on pair (0,1); coop (1,1) on pair (2,3); nc user 2 on pair (1,2)
        assignment.rho[0, 0, 0, 1] = 1
        assignment.rho[1, 1, 2, 3] = 1
        assignment.sigma1[2, 1] = 1
        assignment.sigma2[2, 2] = 1
        for mode in SinrMode:
            want = (
                rate_from_sinr(
                    sinr_cooperative(
                        powers.p_coop_user[0, 0, 0], powers.p_coop_relay[0, 1], bs.p_b[1],
                        gains.a[0, 0, 0], gains.b2[0, 1], gains.c_si[1], mode,
                    )
                )
                + rate_from_sinr(
                    sinr_cooperative(
                        powers.p_coop_user[1, 1, 2], powers.p_coop_relay[1, 3], bs.p_b[3],
                        gains.a[1, 1, 2], gains.b2[1, 3], gains.c_si[3], mode,
                    )
                )
                + rate_from_sinr(sinr_noncooperative(powers.p_nc1[2, 1], gains.b1[2, 1], bs.p_b[1], gains.c_si[1]))
                + rate_from_sinr(sinr_noncooperative(powers.p_nc2[2, 2], gains.b2[2, 2], bs.p_b[2], gains.c_si[2]))
            )
            got = total_sum_rate(assignment, powers, gains, bs, mode)
            assert got == pytest.approx(want, rel=1e-12)


class TestProvisionalPowers:
    def test_equal_split(self):
        p = ProvisionalPowers.equal_split(0.1, 0.2, 8)
        assert p.coop_first_hop_w == pytest.approx(0.0125)
        assert p.coop_second_hop_w == pytest.approx(0.0125)
        assert p.nc_per_subcarrier_w == pytest.approx(0.025)


class TestBsPolicy:
    def test_uniform_split(self):
        bs = BsPowerPolicy.uniform(10.0, 8)
        assert bs.p_b.shape == (8,)
        assert np.all(bs.p_b == 1.25)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            BsPowerPolicy.uniform(-1.0, 8)
