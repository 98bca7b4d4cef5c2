import numpy as np
import pytest

from ceimerge.belief import Belief, expected_acceleration, build_belief
from ceimerge.risk import (
    RiskThresholds,
    evaluate_thresholds,
    perceived_risk,
    perceived_risk_candidates,
)
from ceimerge.scenario import Track

# single belief point N(112, 2) with scale 3 against ego front 110,
# collision bounds (105.5, 114.5); derived by quadrature
RISK_SINGLE_POINT = 0.8141145027026783


def _belief(means, sigmas, scale=3.0):
    means = np.asarray(means, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    times = np.arange(1, len(means) + 1) * 0.25
    return Belief(0.0, times, means, sigmas, scale)


class TestPerceivedRisk:
    def test_single_point_value(self):
        b = _belief([112.0], [2.0])
        got = perceived_risk(np.array([110.0]), b, Track())
        assert got == pytest.approx(RISK_SINGLE_POINT, abs=1e-12)

    def test_zero_before_merge_point(self):
        b = _belief([112.0, 95.0], [2.0, 2.0])
        got = perceived_risk(np.array([99.0, 99.5]), b, Track())
        assert got == 0.0

    def test_max_over_points(self):
        b = _belief([112.0, 112.0], [2.0, 0.5])
        loose = perceived_risk(np.array([110.0, 50.0]), b, Track())
        tight = perceived_risk(np.array([50.0, 112.0]), b, Track())
        assert tight > loose

    def test_length_mismatch_rejected(self):
        b = _belief([112.0], [2.0])
        with pytest.raises(ValueError):
            perceived_risk(np.array([110.0, 111.0]), b, Track())

    def test_monotone_in_vehicle_length(self):
        b = _belief([112.0], [2.0])
        small = perceived_risk(np.array([110.0]), b, Track(vehicle_length=3.0))
        large = perceived_risk(np.array([110.0]), b, Track(vehicle_length=6.0))
        assert large > small

    def test_candidates_match_scalar(self):
        rng = np.random.default_rng(4)
        e = expected_acceleration(rng.normal(0, 0.5, size=20), comfortable_accel=1.0)
        b = build_belief(0.0, 95.0, 10.0, e, horizon=6.0, frequency=4.0, variance_scale=3.0)
        track = Track()
        positions = np.cumsum(rng.uniform(1, 4, size=(8, len(b))), axis=1) + 95.0
        vec = perceived_risk_candidates(positions, b, track)
        for i in range(8):
            assert vec[i] == pytest.approx(perceived_risk(positions[i], b, track), abs=1e-12)


class TestThresholds:
    def test_incentive_arithmetic(self):
        thr = RiskThresholds(0.2, 0.5, lambda_l=(0.0, 0.0, 0.0), lambda_u=(0.003, 0.018, -0.006))
        lo, up = evaluate_thresholds(thr, 4.0, 0.8)
        # 0.003*4 + 0.018*0.8 - 0.006*3.2 = +0.0072
        assert up == pytest.approx(0.5072)
        assert lo == pytest.approx(0.2)

    def test_linear_in_covariates(self):
        thr = RiskThresholds(0.2, 0.5, lambda_l=(0.004, 0.016, -0.003), lambda_u=(0.003, 0.018, -0.006))
        lo0, up0 = evaluate_thresholds(thr, 0.0, 0.0)
        assert lo0 == pytest.approx(0.2)
        assert up0 == pytest.approx(0.5)
        lo, up = evaluate_thresholds(thr, 2.0, -0.8)
        assert lo == pytest.approx(0.2 + 0.004 * 2 + 0.016 * -0.8 + -0.003 * 2 * -0.8)
        assert up == pytest.approx(0.5 + 0.003 * 2 + 0.018 * -0.8 + -0.006 * 2 * -0.8)

    def test_upper_clamped(self):
        thr = RiskThresholds(0.2, 0.95, lambda_u=(0.1, 0.0, 0.0))
        _, up = evaluate_thresholds(thr, 4.0, 0.0)
        assert up == 0.999
        thr = RiskThresholds(0.002, 0.01, lambda_u=(-0.1, 0.0, 0.0))
        _, up = evaluate_thresholds(thr, 4.0, 0.0)
        assert up == 0.002

    def test_lower_clamped_below_upper(self):
        thr = RiskThresholds(0.4, 0.41, lambda_l=(0.1, 0.0, 0.0))
        lo, up = evaluate_thresholds(thr, 4.0, 0.0)
        assert lo == pytest.approx(up - 0.001)
        thr = RiskThresholds(0.05, 0.5, lambda_l=(-0.1, 0.0, 0.0))
        lo, _ = evaluate_thresholds(thr, 4.0, 0.0)
        assert lo == 0.001

    def test_ordering_always_holds(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            thr = RiskThresholds(
                rng.uniform(0.01, 0.5),
                rng.uniform(0.2, 0.9),
                lambda_l=tuple(rng.normal(0, 0.05, 3)),
                lambda_u=tuple(rng.normal(0, 0.05, 3)),
            )
            lo, up = evaluate_thresholds(thr, rng.uniform(-4, 4), rng.uniform(-0.8, 0.8))
            assert 0.001 <= lo < up <= 0.999


def test_packaged_pair3_thresholds():
    from ceimerge.engine import load_parameters

    pairs = {p.label: p for p in load_parameters()}
    p3 = pairs["3"]
    assert p3.left.theta_l == pytest.approx(0.058)
    assert p3.left.theta_u == pytest.approx(0.488)
    assert p3.right.theta_u == pytest.approx(0.631)
