import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fdxsim.geometry import (
    TWO_PI,
    CellGeometry,
    PolarPoint,
    Topology,
    euclidean_distance,
    path_loss_between,
    path_loss_to_bs,
    relay_bs_distances,
    relay_bs_path_loss,
    sample_relay_position,
    sample_topology,
    sample_user_position,
    user_relay_distances,
    user_relay_path_loss,
)

GEOM = CellGeometry(r1=100.0, r2=300.0, alpha=3.0)


class TestPathLoss:
    def test_distance_two_meters_alpha_three(self):
        assert path_loss_to_bs(PolarPoint(2.0, 0.0), 3.0) == pytest.approx(0.125, rel=1e-12)

    def test_between_collinear_points(self):
        # (1, 0) and (2, 0) are 1 m apart
        assert path_loss_between(PolarPoint(1.0, 0.0), PolarPoint(2.0, 0.0), 2.0) == pytest.approx(1.0, rel=1e-12)

    def test_between_opposite_points(self):
        # (1, 0) and (1, pi) are 2 m apart
        assert path_loss_between(PolarPoint(1.0, 0.0), PolarPoint(1.0, math.pi), 3.0) == pytest.approx(0.125, rel=1e-12)

    def test_origin_is_singular(self):
        with pytest.raises(ValueError):
            path_loss_to_bs(PolarPoint(0.0, 0.0), 3.0)

    def test_coincident_nodes_are_singular(self):
        p = PolarPoint(5.0, 1.0)
        with pytest.raises(ValueError):
            path_loss_between(p, p, 3.0)

    def test_unit_distance_is_unit_loss(self):
        for alpha in (2.0, 3.0, 4.5, 6.0):
            assert path_loss_to_bs(PolarPoint(1.0, 0.3), alpha) == 1.0

    @given(
        r1=st.floats(0.1, 1e3),
        t1=st.floats(0.0, TWO_PI, exclude_max=True),
        r2=st.floats(0.1, 1e3),
        t2=st.floats(0.0, TWO_PI, exclude_max=True),
        alpha=st.floats(2.0, 6.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_symmetry_and_positivity(self, r1, t1, r2, t2, alpha):
        p, q = PolarPoint(r1, t1), PolarPoint(r2, t2)
        if euclidean_distance(p, q) == 0.0:
            return
        lpq = path_loss_between(p, q, alpha)
        lqp = path_loss_between(q, p, alpha)
        assert lpq == lqp
        assert lpq > 0.0


class TestEuclidean:
    def test_three_four_five(self):
        assert euclidean_distance(PolarPoint(3.0, 0.0), PolarPoint(4.0, math.pi / 2)) == pytest.approx(5.0, rel=1e-12)

    def test_matches_cartesian_conversion(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            r1, r2 = rng.uniform(0.1, 500.0, 2)
            t1, t2 = rng.uniform(0.0, TWO_PI, 2)
            p, q = PolarPoint(r1, t1), PolarPoint(r2, t2)
            dx = r1 * math.cos(t1) - r2 * math.cos(t2)
            dy = r1 * math.sin(t1) - r2 * math.sin(t2)
            assert euclidean_distance(p, q) == pytest.approx(math.hypot(dx, dy), rel=1e-9, abs=1e-9)

    @given(
        rs=st.tuples(st.floats(0.0, 100.0), st.floats(0.0, 100.0), st.floats(0.0, 100.0)),
        ts=st.tuples(
            st.floats(0.0, TWO_PI, exclude_max=True),
            st.floats(0.0, TWO_PI, exclude_max=True),
            st.floats(0.0, TWO_PI, exclude_max=True),
        ),
    )
    @settings(max_examples=100, deadline=None)
    def test_triangle_inequality(self, rs, ts):
        a, b, c = (PolarPoint(r, t) for r, t in zip(rs, ts))
        assert euclidean_distance(a, c) <= euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-9


class TestValidation:
    def test_polar_point_rejects_negative_radius(self):
        with pytest.raises(ValueError):
            PolarPoint(-1.0, 0.0)

    def test_polar_point_rejects_theta_out_of_range(self):
        with pytest.raises(ValueError):
            PolarPoint(1.0, TWO_PI)

    def test_cell_geometry_orders_radii(self):
        with pytest.raises(ValueError):
            CellGeometry(r1=300.0, r2=100.0, alpha=3.0)

    def test_cell_geometry_alpha_range(self):
        with pytest.raises(ValueError):
            CellGeometry(r1=100.0, r2=300.0, alpha=1.5)
        with pytest.raises(ValueError):
            CellGeometry(r1=100.0, r2=300.0, alpha=6.5)

    def test_topology_rejects_misplaced_nodes(self):
        with pytest.raises(ValueError):
            Topology(relays=(PolarPoint(150.0, 0.0),), users=(PolarPoint(200.0, 0.0),), geometry=GEOM)
        with pytest.raises(ValueError):
            Topology(relays=(PolarPoint(50.0, 0.0),), users=(PolarPoint(50.0, 0.0),), geometry=GEOM)


class TestSamplingLaw:
    """Distribution oracles: KS against the radial law, moments of r."""

    def test_relay_radius_uniform(self):
        rng = np.random.default_rng(12346)
        r = np.array([sample_relay_position(rng, GEOM).r for _ in range(100_000)])
        d, p = stats.kstest(r, "uniform", args=(0.0, GEOM.r1))
        assert p > 0.01, f"KS p={p}, D={d}"
        assert np.mean(r) == pytest.approx(GEOM.r1 / 2.0, rel=0.01)

    def test_user_radius_uniform_on_annulus(self):
        rng = np.random.default_rng(2024)
        r = np.array([sample_user_position(rng, GEOM).r for _ in range(100_000)])
        d, p = stats.kstest(r, "uniform", args=(GEOM.r1, GEOM.r2 - GEOM.r1))
        assert p > 0.01, f"KS p={p}, D={d}"
        assert np.mean(r) == pytest.approx((GEOM.r1 + GEOM.r2) / 2.0, rel=0.01)
        assert r.min() >= GEOM.r1 and r.max() < GEOM.r2

    def test_angles_uniform(self):
        rng = np.random.default_rng(99)
        t = np.array([sample_relay_position(rng, GEOM).theta for _ in range(100_000)])
        d, p = stats.kstest(t, "uniform", args=(0.0, TWO_PI))
        assert p > 0.01, f"KS p={p}, D={d}"


class TestTopologySampling:
    def test_counts_and_supports(self):
        rng = np.random.default_rng(5)
        topo = sample_topology(rng, GEOM, k1=4, k2=6)
        assert len(topo.users) == 4 and len(topo.relays) == 6
        assert all(p.r < GEOM.r1 for p in topo.relays)
        assert all(GEOM.r1 <= p.r < GEOM.r2 for p in topo.users)

    def test_separation_guard(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            topo = sample_topology(rng, GEOM, k1=4, k2=4)
            pts = list(topo.relays) + list(topo.users)
            assert all(p.r >= 1.0 for p in pts)
            for i in range(len(pts)):
                for j in range(i + 1, len(pts)):
                    assert euclidean_distance(pts[i], pts[j]) >= 1.0

    def test_deterministic_given_seed(self):
        t1 = sample_topology(np.random.default_rng(42), GEOM, 3, 5)
        t2 = sample_topology(np.random.default_rng(42), GEOM, 3, 5)
        assert t1 == t2

    def test_rejects_empty_groups(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            sample_topology(rng, GEOM, k1=0, k2=4)


class TestDistanceHelpers:
    def test_matrices_match_scalar_ops(self):
        rng = np.random.default_rng(31)
        topo = sample_topology(rng, GEOM, k1=3, k2=4)
        d = user_relay_distances(topo)
        l_ur = user_relay_path_loss(topo)
        for k, u in enumerate(topo.users):
            for m, r in enumerate(topo.relays):
                assert d[k, m] == euclidean_distance(u, r)
                assert l_ur[k, m] == pytest.approx(path_loss_between(u, r, GEOM.alpha), rel=1e-12)
        d_bs = relay_bs_distances(topo)
        l_bs = relay_bs_path_loss(topo)
        for m, r in enumerate(topo.relays):
            assert d_bs[m] == r.r
            assert l_bs[m] == pytest.approx(path_loss_to_bs(r, GEOM.alpha), rel=1e-12)
