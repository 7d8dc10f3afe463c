import numpy as np
import pytest
from scipy import stats

from fdxsim.channel import ChannelRealization, SiConfig, draw_complex_gaussian, make_realization
from fdxsim.geometry import CellGeometry, sample_topology

GEOM = CellGeometry(r1=100.0, r2=300.0, alpha=3.0)


def _topo(seed=0, k1=2, k2=3):
    return sample_topology(np.random.default_rng(seed), GEOM, k1=k1, k2=k2)


class TestComplexGaussian:
    def test_unit_power_and_zero_mean(self):
        rng = np.random.default_rng(8)
        h = draw_complex_gaussian(rng, 1_000_000)
        p = np.abs(h) ** 2
        assert np.mean(p) == pytest.approx(1.0, rel=0.01)
        assert abs(np.mean(h.real)) < 3e-3
        assert abs(np.mean(h.imag)) < 3e-3
        # real/imag parts carry half the power each
        assert np.var(h.real) == pytest.approx(0.5, rel=0.02)
        assert np.var(h.imag) == pytest.approx(0.5, rel=0.02)

    def test_power_is_exponential(self):
        rng = np.random.default_rng(77)
        p = np.abs(draw_complex_gaussian(rng, 1_000_000)) ** 2
        d, pval = stats.kstest(p, "expon")
        assert pval > 0.01, f"KS p={pval}, D={d}"


class TestRealization:
    def test_shapes(self):
        real = make_realization(_topo(k1=2, k2=3), 8, SiConfig(enabled=True), 1e-16, np.random.default_rng(1))
        assert real.h.shape == (2, 3, 8)
        assert real.g1.shape == (3, 8)
        assert real.g2.shape == (3, 8)
        assert real.h_si.shape == (8,)
        assert real.n_subcarriers == 8

    def test_si_disabled_is_identically_zero(self):
        real = make_realization(_topo(), 8, SiConfig(enabled=False), 1e-16, np.random.default_rng(2))
        assert np.all(real.h_si == 0.0)

    def test_si_switch_preserves_other_draws(self):
        on = make_realization(_topo(), 8, SiConfig(enabled=True), 1e-16, np.random.default_rng(3))
        off = make_realization(_topo(), 8, SiConfig(enabled=False), 1e-16, np.random.default_rng(3))
        assert np.array_equal(on.h, off.h)
        assert np.array_equal(on.g1, off.g1)
        assert np.array_equal(on.g2, off.g2)
        assert np.any(on.h_si != 0.0) and np.all(off.h_si == 0.0)

    def test_residual_factor_scales_si_power(self):
        topo = _topo(k1=1, k2=1)
        acc = []
        for s in range(100_000):
            real = make_realization(topo, 8, SiConfig(enabled=True, residual_factor=0.01), 1e-16, np.random.default_rng(s))
            acc.append(np.abs(real.h_si) ** 2)
        assert np.mean(np.concatenate(acc)) == pytest.approx(0.01, rel=0.03)

    def test_deterministic_given_seed(self):
        a = make_realization(_topo(), 8, SiConfig(enabled=True), 1e-16, np.random.default_rng(9))
        b = make_realization(_topo(), 8, SiConfig(enabled=True), 1e-16, np.random.default_rng(9))
        assert np.array_equal(a.h, b.h) and np.array_equal(a.g1, b.g1)
        assert np.array_equal(a.g2, b.g2) and np.array_equal(a.h_si, b.h_si)

    def test_slot_draws_are_independent(self):
        # 500 realizations of a (40, 50) grid -> 1e6 paired samples
        topo = _topo(seed=4, k1=1, k2=40)
        p1, p2 = [], []
        for s in range(500):
            real = make_realization(topo, 50, SiConfig(enabled=False), 1e-16, np.random.default_rng(s))
            p1.append((np.abs(real.g1) ** 2).ravel())
            p2.append((np.abs(real.g2) ** 2).ravel())
        x = np.concatenate(p1)
        y = np.concatenate(p2)
        corr = np.corrcoef(x, y)[0, 1]
        assert abs(corr) < 0.01

    def test_unit_mean_channel_power_per_link(self):
        # every tensor entry is unit-variance: check h across many seeds
        topo = _topo(seed=5, k1=2, k2=2)
        acc = []
        for s in range(2000):
            real = make_realization(topo, 8, SiConfig(enabled=True), 1e-16, np.random.default_rng(s))
            acc.append(np.abs(real.h) ** 2)
        assert np.mean(np.stack(acc)) == pytest.approx(1.0, rel=0.01)

    def test_validation(self):
        with pytest.raises(ValueError):
            make_realization(_topo(), 0, SiConfig(), 1e-16, np.random.default_rng(0))
        with pytest.raises(ValueError):
            make_realization(_topo(), 8, SiConfig(), 0.0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            SiConfig(enabled=True, residual_factor=1.5)
