import math

import numpy as np
import pytest

from ceimerge.belief import (
    build_belief,
    expected_acceleration,
    mixture_mass,
    mixture_mass_array,
    project_belief_point,
)

# mass of the standard two-component mixture on (-1, 1) with scale 3,
# derived by quadrature: (Phi(1)-Phi(-1))/2 + (Phi(1/sqrt(3))-Phi(-1/sqrt(3)))/2
MIXTURE_UNIT_INTERVAL = 0.5594933152431565


class TestExpectedAcceleration:
    def test_variance_floor(self):
        e = expected_acceleration(np.zeros(40), comfortable_accel=1.0)
        assert e.mean == 0.0
        assert e.variance == pytest.approx(1.0 / 9.0)

    def test_population_variance_on_top_of_floor(self):
        samples = np.array([1.0, -1.0] * 20)
        e = expected_acceleration(samples, comfortable_accel=1.0)
        assert e.mean == 0.0
        assert e.variance == pytest.approx(1.0 / 9.0 + 1.0)

    def test_constant_history(self):
        e = expected_acceleration(np.full(10, 0.5), comfortable_accel=1.0)
        assert e.mean == pytest.approx(0.5)
        assert e.variance == pytest.approx(1.0 / 9.0)

    def test_floor_scales_with_comfortable_accel(self):
        e = expected_acceleration(np.zeros(5), comfortable_accel=3.0)
        assert e.variance == pytest.approx(1.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            expected_acceleration(np.array([]), comfortable_accel=1.0)


class TestProjection:
    def test_mean_is_constant_acceleration_kinematics(self):
        e = expected_acceleration(np.full(10, 0.5), comfortable_accel=1.0)
        mean, _ = project_belief_point(2.0, 50.0, 10.0, e)
        assert mean == pytest.approx(50.0 + 10.0 * 2.0 + 0.5 * 4.0 * 0.5)

    def test_linear_law_spread(self):
        # variance 1/9 projected 2 s ahead: sigma^2 = (t^2/2) * var = 2/9
        e = expected_acceleration(np.zeros(10), comfortable_accel=1.0)
        _, sigma = project_belief_point(2.0, 50.0, 10.0, e, law="linear")
        assert sigma**2 == pytest.approx(2.0 / 9.0)

    def test_quadratic_law_spread(self):
        # sigma = (t^2/2) * sqrt(var) = 2 * (1/3): sigma^2 = 4/9
        e = expected_acceleration(np.zeros(10), comfortable_accel=1.0)
        _, sigma = project_belief_point(2.0, 50.0, 10.0, e, law="quadratic")
        assert sigma**2 == pytest.approx(4.0 / 9.0)

    def test_zero_horizon_degenerate(self):
        e = expected_acceleration(np.zeros(10), comfortable_accel=1.0)
        mean, sigma = project_belief_point(0.0, 50.0, 10.0, e)
        assert mean == 50.0
        assert sigma == 0.0

    def test_unknown_law(self):
        e = expected_acceleration(np.zeros(10), comfortable_accel=1.0)
        with pytest.raises(ValueError):
            project_belief_point(1.0, 50.0, 10.0, e, law="cubic")


class TestBuildBelief:
    def test_point_count_and_times(self):
        e = expected_acceleration(np.zeros(10), comfortable_accel=1.0)
        b = build_belief(0.0, 50.0, 10.0, e, horizon=6.0, frequency=4.0, variance_scale=3.0)
        assert len(b) == 24
        assert b.times[0] == pytest.approx(0.25)
        assert b.times[-1] == pytest.approx(6.0)
        assert np.allclose(np.diff(b.times), 0.25)

    def test_means_ramp(self):
        e = expected_acceleration(np.zeros(10), comfortable_accel=1.0)
        b = build_belief(0.0, 50.0, 10.0, e, horizon=6.0, frequency=4.0, variance_scale=3.0)
        assert b.means[0] == pytest.approx(52.5)
        assert b.means[-1] == pytest.approx(110.0)

    def test_start_time_offsets_are_relative(self):
        e = expected_acceleration(np.zeros(10), comfortable_accel=1.0)
        b = build_belief(7.0, 50.0, 10.0, e, horizon=6.0, frequency=4.0, variance_scale=3.0)
        assert b.times[0] == pytest.approx(7.25)
        assert b.means[0] == pytest.approx(52.5)

    def test_sigmas_grow(self):
        e = expected_acceleration(np.zeros(10), comfortable_accel=1.0)
        b = build_belief(0.0, 50.0, 10.0, e, horizon=6.0, frequency=4.0, variance_scale=3.0)
        assert np.all(np.diff(b.sigmas) > 0)

    def test_too_short_horizon_rejected(self):
        e = expected_acceleration(np.zeros(10), comfortable_accel=1.0)
        with pytest.raises(ValueError):
            build_belief(0.0, 50.0, 10.0, e, horizon=0.1, frequency=4.0, variance_scale=3.0)


class TestMixtureMass:
    def test_unit_interval_value(self):
        assert mixture_mass(0.0, 1.0, 3.0, -1.0, 1.0) == pytest.approx(
            MIXTURE_UNIT_INTERVAL, abs=1e-12
        )

    def test_normalisation(self):
        assert mixture_mass(0.0, 1.0, 3.0, -100.0, 100.0) == pytest.approx(1.0)

    def test_half_mass_by_symmetry(self):
        assert mixture_mass(5.0, 2.0, 3.0, -1e9, 5.0) == pytest.approx(0.5)

    def test_scale_one_collapses_to_single_gaussian(self):
        from scipy.stats import norm

        got = mixture_mass(0.0, 1.0, 1.0, -1.0, 1.0)
        assert got == pytest.approx(norm.cdf(1.0) - norm.cdf(-1.0), abs=1e-12)

    def test_monotone_in_interval_inclusion(self):
        a = mixture_mass(0.0, 1.0, 3.0, -1.0, 1.0)
        b = mixture_mass(0.0, 1.0, 3.0, -2.0, 2.0)
        assert b > a

    def test_empty_interval(self):
        assert mixture_mass(0.0, 1.0, 3.0, 1.0, 1.0) == 0.0
        assert mixture_mass(0.0, 1.0, 3.0, 2.0, -2.0) == 0.0

    def test_degenerate_sigma_is_indicator(self):
        assert mixture_mass(0.5, 0.0, 3.0, 0.0, 1.0) == 1.0
        assert mixture_mass(5.0, 0.0, 3.0, 0.0, 1.0) == 0.0

    def test_bounded(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            m = rng.normal(0, 10)
            s = rng.uniform(0.01, 5)
            lo = rng.normal(0, 10)
            hi = lo + rng.uniform(0, 10)
            mass = mixture_mass(m, s, 3.0, lo, hi)
            assert 0.0 <= mass <= 1.0

    def test_array_matches_scalar(self):
        rng = np.random.default_rng(3)
        means = rng.normal(100, 5, size=16)
        sigmas = rng.uniform(0.1, 4, size=16)
        lo = means - rng.uniform(0, 5, size=16)
        hi = means + rng.uniform(0, 5, size=16)
        arr = mixture_mass_array(means, sigmas, 3.0, lo, hi)
        for i in range(16):
            assert arr[i] == pytest.approx(
                mixture_mass(means[i], sigmas[i], 3.0, lo[i], hi[i]), abs=1e-12
            )
