import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavrelay import channel as ch
from uavrelay.scenario import SPEED_OF_LIGHT, A2GParams, Scenario, db_to_linear


class TestFreeSpacePathloss:
    def test_one_ghz_value(self):
        # hand evaluation of (4*pi*f/c)^2 with c = 2.998e8
        assert ch.free_space_pathloss(1e9) == pytest.approx(1756.9381412984433, rel=1e-12)

    def test_doubling_frequency_quadruples(self):
        assert ch.free_space_pathloss(2e9) == pytest.approx(4 * ch.free_space_pathloss(1e9), rel=1e-12)

    def test_unit_frequency(self):
        assert ch.free_space_pathloss(SPEED_OF_LIGHT / (4 * math.pi)) == pytest.approx(1.0, rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            ch.free_space_pathloss(0.0)


class TestLosProbability:
    def test_at_theta_equal_a(self):
        assert ch.los_probability(9.6, 9.6, 0.28) == pytest.approx(1 / 10.6, rel=1e-12)

    def test_overhead(self):
        p = ch.los_probability(90.0, 9.6, 0.28)
        assert 1.0 - p == pytest.approx(1.6048478e-09, rel=1e-6)

    @given(st.floats(0.1, 89.0))
    @settings(max_examples=50, deadline=None)
    def test_strictly_increasing(self, theta):
        assert ch.los_probability(theta + 1.0, 9.6, 0.28) > ch.los_probability(theta, 9.6, 0.28)

    @given(st.floats(0.001, 90.0), st.floats(0.5, 20.0), st.floats(0.01, 1.0))
    @settings(max_examples=100, deadline=None)
    def test_open_unit_interval(self, theta, a, b):
        p = ch.los_probability(theta, a, b)
        assert 0.0 < p <= 1.0
        if b * (theta - a) < 30.0:  # beyond this the logistic saturates in float64
            assert p < 1.0

    def test_domain(self):
        with pytest.raises(ValueError):
            ch.los_probability(0.0, 9.6, 0.28)
        with pytest.raises(ValueError):
            ch.los_probability(90.1, 9.6, 0.28)


class TestA2gGain:
    def test_overhead_reference_value(self):
        # chain: L(1 GHz) -> PR(90) -> mixture pathloss at d = 100
        g = ch.a2g_gain((0, 0, 130.0), (0, 0, 30.0), 1e9, A2GParams())
        assert g == pytest.approx(4.521093350235884e-08, rel=1e-10)

    def test_equal_attenuations_collapse_mixture(self):
        params = A2GParams(eta_los=3.0, eta_nlos=3.0)
        for uav in ((10.0, -20.0, 90.0), (50.0, 0.0, 140.0)):
            d = math.dist(uav, (0, 0, 30.0))
            expect = 1.0 / (ch.free_space_pathloss(1e9) * d * d * 3.0)
            assert ch.a2g_gain(uav, (0, 0, 30.0), 1e9, params) == pytest.approx(expect, rel=1e-12)

    def test_distance_squared_law_at_fixed_elevation(self):
        near = ch.a2g_gain((0, 0, 130.0), (0, 0, 30.0), 1e9, A2GParams())
        far = ch.a2g_gain((0, 0, 230.0), (0, 0, 30.0), 1e9, A2GParams())
        assert far == pytest.approx(near / 4.0, rel=1e-12)

    def test_bracketed_by_pure_los_and_nlos(self):
        params = A2GParams()
        uav, peer = (60.0, 10.0, 120.0), (0.0, 0.0, 30.0)
        d = math.dist(uav, peer)
        base = ch.free_space_pathloss(1e9) * d * d
        lo = 1.0 / (base * params.eta_nlos)
        hi = 1.0 / (base * params.eta_los)
        assert lo < ch.a2g_gain(uav, peer, 1e9, params) < hi

    def test_reciprocal(self):
        a, b = (40.0, -10.0, 150.0), (0.0, 0.0, 30.0)
        assert ch.a2g_gain(a, b, 1e9, A2GParams()) == ch.a2g_gain(b, a, 1e9, A2GParams())

    def test_rejects_degenerate_geometry(self):
        with pytest.raises(ValueError):
            ch.a2g_gain((0, 0, 100.0), (0, 0, 100.0), 1e9, A2GParams())
        with pytest.raises(ValueError):
            ch.a2g_gain((0, 0, 100.0), (50, 0, 100.0), 1e9, A2GParams())

    @given(st.floats(10.0, 500.0), st.floats(31.0, 400.0))
    @settings(max_examples=50, deadline=None)
    def test_decreasing_in_distance_at_fixed_elevation(self, rho, z):
        # scale the whole geometry: elevation fixed, distance doubles
        uav, peer = (rho, 0.0, 30.0 + z), (0.0, 0.0, 30.0)
        far = (2 * rho, 0.0, 30.0 + 2 * z)
        assert ch.a2g_gain(far, peer, 1e9, A2GParams()) < ch.a2g_gain(uav, peer, 1e9, A2GParams())


class TestRayleighGain:
    def test_unit_distance(self):
        assert ch.rayleigh_gain((0, 0, 0), (1, 0, 0), 4.0) == 1.0

    def test_power_law(self):
        assert ch.rayleigh_gain((100, 0, 0), (0, 0, 0), 4.0) == pytest.approx(1e-8, rel=1e-12)

    def test_coincident_rejected(self):
        with pytest.raises(ValueError):
            ch.rayleigh_gain((1, 2, 0), (1, 2, 0), 4.0)


class TestFading:
    def test_none_is_ones(self):
        rng = np.random.default_rng(0)
        assert np.all(ch.fading_draws("none", (4, 3), rng) == 1.0)

    def test_rayleigh_unit_mean(self):
        rng = np.random.default_rng(5)
        draws = ch.fading_draws("rayleigh", 100_000, rng)
        assert np.mean(draws) == pytest.approx(1.0, rel=0.02)

    def test_rician_unit_mean(self):
        rng = np.random.default_rng(6)
        draws = ch.fading_draws("rician", 100_000, rng, k_db=10.0)
        assert np.mean(draws) == pytest.approx(1.0, rel=0.02)

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            ch.fading_draws("nakagami", 3, np.random.default_rng(0))


class TestGainMatrices:
    def test_shapes_and_positivity(self):
        s = Scenario().with_positions(seed=3)
        gains = ch.gain_matrices(s, s.uav_start)
        assert gains.h_ue_bs.shape == (5, 10)
        assert gains.h_ue_uav.shape == (5, 10)
        assert gains.h_uav_bs.shape == (10,)
        for arr in (gains.h_ue_bs, gains.h_ue_uav, gains.h_uav_bs):
            assert np.all(arr > 0) and np.all(np.isfinite(arr))

    def test_equal_frequencies_give_equal_columns(self):
        s = Scenario().with_positions(seed=3)
        gains = ch.gain_matrices(s, s.uav_start)
        assert np.allclose(gains.h_ue_bs, gains.h_ue_bs[:, :1])
        assert np.allclose(gains.h_uav_bs, gains.h_uav_bs[0])

    def test_fading_seeded_per_slot(self):
        s = Scenario(fading_model="rayleigh").with_positions(seed=3)
        a = ch.gain_matrices(s, s.uav_start, slot_index=0)
        b = ch.gain_matrices(s, s.uav_start, slot_index=0)
        c = ch.gain_matrices(s, s.uav_start, slot_index=1)
        assert np.array_equal(a.h_ue_bs, b.h_ue_bs)
        assert not np.array_equal(a.h_ue_bs, c.h_ue_bs)


class TestDirichletKernel:
    def test_center(self):
        assert ch.dirichlet_kernel(0.0, 1000) == pytest.approx(1.0, abs=1e-15)

    def test_integer_offsets_vanish(self):
        vals = ch.dirichlet_kernel(np.arange(1, 500, dtype=float), 1000)
        assert np.max(np.abs(vals)) < 1e-12

    @given(st.floats(-499.0, 499.0))
    @settings(max_examples=100, deadline=None)
    def test_magnitude_bounded(self, x):
        assert abs(ch.dirichlet_kernel(x, 1000)) <= 1.0 + 1e-12

    @given(st.floats(0.001, 0.999))
    @settings(max_examples=30, deadline=None)
    def test_total_power_over_period_is_one(self, frac):
        # Parseval: the DFT of a pure tone has unit total power
        offsets = np.arange(-500, 500, dtype=float) + frac
        assert np.sum(ch.dirichlet_kernel(offsets, 1000) ** 2) == pytest.approx(1.0, abs=1e-12)


class TestIci:
    def test_zero_speed_is_exactly_zero(self):
        ctx = ch.reference_ici_context("relay", uav_speed=0.0)
        assert ch.ici_power("relay", ctx) == 0.0

    def test_reference_ratios(self):
        relay = ch.ici_ratio_db("relay", ch.reference_ici_context("relay"))
        cell = ch.ici_ratio_db("cellular", ch.reference_ici_context("cellular"))
        assert relay == pytest.approx(-31.14, abs=0.05)
        assert cell == pytest.approx(-16.14, abs=0.05)
        assert relay < cell

    def test_normalized_doppler(self):
        ctx = ch.reference_ici_context("relay")
        v = 100.0 / 3.6
        assert ctx.max_normalized_doppler == pytest.approx(v * 3.5e9 / SPEED_OF_LIGHT / 15e3, rel=1e-12)

    def test_full_occupancy_power_conservation(self):
        ctx = ch.reference_ici_context("relay")
        total = ch.ici_power("relay", ctx) + ch.desired_power("relay", ctx)
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_desired_power_modes(self):
        ctx_r = ch.reference_ici_context("relay")
        assert ch.desired_power("relay", ctx_r) < ctx_r.desired_power
        ctx_c = ch.reference_ici_context("cellular")
        assert ch.desired_power("cellular", ctx_c) == ctx_c.desired_power

    def test_occupancy_sensitivity_rows(self):
        rows = ch.occupancy_sensitivity((1.0, 0.5, 0.1))
        assert [r[0] for r in rows] == [1.0, 0.5, 0.1]
        for _, relay_db, cell_db in rows:
            assert relay_db == pytest.approx(-31.1, abs=1.0)
            assert cell_db == pytest.approx(-16.1, abs=1.0)

    def test_empty_occupancy(self):
        ctx = ch.reference_ici_context("relay", occupancy=0.0)
        assert ch.ici_power("relay", ctx) == 0.0

    def test_bad_indices_rejected(self):
        ctx = ch.IciContext(occupied=(2000,), powers=(1.0,))
        with pytest.raises(ValueError):
            ch.ici_power("relay", ctx)
