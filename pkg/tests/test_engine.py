import math

import numpy as np
import pytest

from ceimerge.engine import (
    PairParams,
    ParameterError,
    TrialFormatError,
    code_version,
    derive_seed,
    load_parameters,
    load_trial_log,
    run_batch,
    run_trial,
    save_parameters,
    save_trial_log,
)
from ceimerge.params import ModelConstants
from ceimerge.risk import RiskThresholds
from ceimerge.scenario import ALL_CONDITIONS, Condition, Track


def _pair3():
    return {p.label: p for p in load_parameters()}["3"]


def _sides_equal(a, b):
    assert a.initial_velocity == b.initial_velocity
    for name in ("front", "velocity", "net_accel", "commanded", "executed",
                 "perceived_other_velocity", "risk", "rho_lower", "rho_upper"):
        x, y = getattr(a, name), getattr(b, name)
        assert np.array_equal(x, y, equal_nan=True), name
    assert a.replan == b.replan


class TestRunTrial:
    def test_same_seed_is_bitwise_identical(self):
        a = run_trial("0_0", _pair3(), seed=42)
        b = run_trial("0_0", _pair3(), seed=42)
        assert np.array_equal(a.t, b.t)
        _sides_equal(a.left, b.left)
        _sides_equal(a.right, b.right)
        assert a.outcome == b.outcome

    def test_different_seeds_differ(self):
        a = run_trial("0_0", _pair3(), seed=1)
        b = run_trial("0_0", _pair3(), seed=2)
        assert not np.array_equal(a.left.velocity, b.left.velocity)

    def test_deterministic_mode_ignores_seed(self):
        a = run_trial("0_0", _pair3(), seed=1, mode="deterministic")
        b = run_trial("0_0", _pair3(), seed=2, mode="deterministic")
        assert np.array_equal(a.left.velocity, b.left.velocity)
        assert np.array_equal(a.right.front, b.right.front)

    def test_invalid_mode_and_opponent(self):
        with pytest.raises(ValueError):
            run_trial("0_0", _pair3(), mode="chaotic")
        with pytest.raises(ValueError):
            run_trial("0_0", _pair3(), opponent="ghost")

    def test_physical_sanity(self):
        log = run_trial("4_8", _pair3(), seed=7)
        dt = log.dt
        for side in (log.left, log.right):
            assert np.all(side.velocity >= 0.0)
            dp = np.diff(side.front)
            assert np.all(dp >= -1e-12)
            # no teleports: each step moves at most v * dt
            assert np.all(dp <= side.velocity[1:] * dt + 1e-9)

    def test_replan_codes_known(self):
        log = run_trial("0_0", _pair3(), seed=3)
        base = {"", "initial", "upper", "lower", "velocity", "retry"}
        for side in (log.left, log.right):
            for code in side.replan:
                root = code.split("+")[0]
                assert root in base, code
            assert side.replan[0].startswith("initial")

    def test_tunnel_phase_blind(self):
        # no risk appraisal before both vehicles have left the tunnel
        log = run_trial("0_0", _pair3(), seed=5)
        exit_i = int(np.searchsorted(log.t, log.tunnel_exit_time - 1e-9))
        assert np.all(np.isnan(log.left.risk[1:exit_i]))
        assert not np.all(np.isnan(log.left.risk[exit_i:]))

    def test_outcome_completed_and_times(self):
        log = run_trial("0_0", _pair3(), seed=11)
        assert log.outcome == "completed"
        assert log.tunnel_exit_time is not None
        assert log.collision_time is None
        assert log.t[-1] <= ModelConstants().trial_timeout

    def test_timeout(self):
        cst = ModelConstants(trial_timeout=6.0)
        log = run_trial("0_0", _pair3(), seed=1, constants=cst)
        assert log.outcome == "timeout"
        assert log.t[-1] == pytest.approx(6.0)

    def test_truncation_after_exit(self):
        log = run_trial("0_0", _pair3(), seed=1, stop_after_exit=1.0)
        assert log.outcome == "truncated"
        assert log.t[-1] == pytest.approx(log.tunnel_exit_time + 1.0, abs=0.051)

    def test_constant_opponent_right(self):
        log = run_trial("0_0", _pair3(), seed=1, opponent="constant")
        assert log.scripted == ("right",)
        v = log.right.velocity
        assert np.all(v == v[0])
        assert np.all(np.isnan(log.right.risk[1:]))

    def test_constant_opponent_left(self):
        log = run_trial("0_0", _pair3(), seed=1, opponent="constant_left")
        assert log.scripted == ("left",)
        v = log.left.velocity
        assert np.all(v == v[0])

    def test_modelled_trial_not_scripted(self):
        log = run_trial("0_0", _pair3(), seed=1)
        assert log.scripted == ()


class TestMirrorSymmetry:
    def test_noise_free_mirror_bitwise_for_pair(self):
        pair = _pair3()
        log = run_trial("4_8", pair, mode="deterministic")
        mirror = run_trial(
            Condition.from_label("4_8").mirrored(), pair.swapped(), mode="deterministic"
        )
        assert np.array_equal(log.t, mirror.t)
        _sides_equal(log.left, mirror.right)
        _sides_equal(log.right, mirror.left)
        assert log.outcome == mirror.outcome


class TestSeeds:
    def test_derive_seed_deterministic_and_distinct(self):
        s1 = derive_seed(0, "3", "0_0", 0)
        s2 = derive_seed(0, "3", "0_0", 0)
        assert s1 == s2
        assert derive_seed(0, "3", "0_0", 1) != s1
        assert derive_seed(1, "3", "0_0", 0) != s1
        assert derive_seed(0, "4", "0_0", 0) != s1
        assert derive_seed(0, "3", "2_0", 0) != s1

    def test_batch_repeatable_and_ordered(self):
        pair = _pair3()
        a = run_batch([pair], conditions=["0_0", "2_0"], repetitions=2, base_seed=5)
        b = run_batch([pair], conditions=["0_0", "2_0"], repetitions=2, base_seed=5)
        assert len(a) == 4
        labels = [(log.condition.label, log.repetition) for log in a]
        assert labels == [("0_0", 0), ("0_0", 1), ("2_0", 0), ("2_0", 1)]
        for x, y in zip(a, b):
            _sides_equal(x.left, y.left)
            _sides_equal(x.right, y.right)


class TestTrialSerialization:
    def test_roundtrip_bitwise(self, tmp_path):
        log = run_trial("4_-8", _pair3(), seed=13)
        path = tmp_path / "trial.csv"
        save_trial_log(log, path)
        back = load_trial_log(path)
        assert back.condition.label == log.condition.label
        assert back.pair == log.pair
        assert back.repetition == log.repetition
        assert back.seed == log.seed
        assert back.mode == log.mode
        assert back.outcome == log.outcome
        assert back.scripted == log.scripted
        assert back.tunnel_exit_time == log.tunnel_exit_time
        assert np.array_equal(back.t, log.t)
        _sides_equal(back.left, log.left)
        _sides_equal(back.right, log.right)

    def test_roundtrip_keeps_scripted_sides(self, tmp_path):
        log = run_trial("0_0", _pair3(), seed=1, opponent="constant")
        path = tmp_path / "probe.csv"
        save_trial_log(log, path)
        assert load_trial_log(path).scripted == ("right",)

    def test_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("not a trial log\n1,2,3\n")
        with pytest.raises(TrialFormatError):
            load_trial_log(path)

    def test_rejects_newer_schema(self, tmp_path):
        log = run_trial("0_0", _pair3(), seed=1)
        path = tmp_path / "future.csv"
        save_trial_log(log, path)
        text = path.read_text().replace('"schema": 2', '"schema": 3')
        path.write_text(text)
        with pytest.raises(TrialFormatError):
            load_trial_log(path)


class TestParameters:
    def test_packaged_defaults(self):
        pairs = load_parameters()
        assert len(pairs) == 9
        assert [p.label for p in pairs] == [str(i) for i in range(1, 10)]
        for p in pairs:
            for thr in (p.left, p.right):
                assert 0.0 < thr.theta_l < thr.theta_u < 1.0
                assert thr.lambda_u == (0.003, 0.018, -0.006)
                assert thr.lambda_l == (0.004, 0.016, -0.003)

    def test_roundtrip(self, tmp_path):
        pairs = load_parameters()
        path = tmp_path / "params.yaml"
        save_parameters(pairs, path)
        back = load_parameters(path)
        assert back == pairs

    def test_malformed_inputs(self, tmp_path):
        cases = [
            "pairs: []\n",
            "incentives: {upper: [0.1, 0.1, 0.1], lower: [0.1, 0.1]}\npairs:\n - {pair: '1', left: {theta_l: 0.1, theta_u: 0.5}, right: {theta_l: 0.1, theta_u: 0.5}}\n",
            "incentives: {upper: [0.1, 0.1, 0.1], lower: [0.1, 0.1, 0.1]}\npairs:\n - {pair: '1', left: {theta_l: 0.6, theta_u: 0.5}, right: {theta_l: 0.1, theta_u: 0.5}}\n",
            "incentives: {upper: [0.1, 0.1, 0.1], lower: [0.1, 0.1, 0.1]}\npairs:\n - {pair: '1', left: {theta_l: 0.1, theta_u: 0.5}, right: {theta_l: 0.1, theta_u: 0.5}}\n - {pair: '1', left: {theta_l: 0.1, theta_u: 0.5}, right: {theta_l: 0.1, theta_u: 0.5}}\n",
        ]
        for i, text in enumerate(cases):
            path = tmp_path / f"bad{i}.yaml"
            path.write_text(text)
            with pytest.raises(ParameterError):
                load_parameters(path)


def test_code_version_stable_format():
    v = code_version()
    assert isinstance(v, str)
    assert len(v) == 16
    int(v, 16)
    assert code_version() == v
