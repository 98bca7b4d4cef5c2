"""Trial engine: drivers, the step loop, batches and trial logs.

A trial advances both vehicles on a fixed step.  Inside the tunnel the
velocities are held constant; from the first step where both fronts have
left the tunnel the drivers are in control.  Each driver holds a constant
acceleration plan and re-plans only when its perceived risk leaves the
band between its two thresholds, when a previous emergency is still
unresolved, or when the own velocity crosses the desired velocity.  Both
drivers decide from start-of-step snapshots, so within a step neither
can react to the other's current decision.
"""

from __future__ import annotations

import hashlib
import importlib.resources
import json
import math
import multiprocessing
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .belief import build_belief, expected_acceleration
from .params import ModelConstants
from .perception import PerceivedOther
from .planner import Plan, apply_execution_noise, fallback_plan, optimize_plan, rollout
from .risk import RiskThresholds, evaluate_thresholds, perceived_risk
from .scenario import (
    DEFAULT_CONDITIONS,
    Condition,
    Track,
    VehicleState,
    detect_collision,
    initial_states,
    resistance,
    step_dynamics,
)


class ParameterError(ValueError):
    """A parameter file is malformed or inconsistent."""


class TrialFormatError(ValueError):
    """A trial log file does not follow the expected format."""


@dataclass(frozen=True)
class PairParams:
    """Risk thresholds for the two drivers of one participant pair."""

    label: str
    left: RiskThresholds
    right: RiskThresholds

    def swapped(self) -> "PairParams":
        """The same pair with the drivers exchanged (for mirror checks)."""
        return PairParams(self.label, self.right, self.left)


def _require(cond: bool, origin: str, message: str) -> None:
    if not cond:
        raise ParameterError(f"{origin}: {message}")


def _parse_slopes(node, origin: str, key: str) -> tuple[float, float, float]:
    _require(isinstance(node, (list, tuple)), origin, f"incentives.{key} must be a list")
    _require(len(node) == 3, origin, f"incentives.{key} needs exactly 3 slopes")
    try:
        a, b, c = (float(x) for x in node)
    except (TypeError, ValueError):
        raise ParameterError(f"{origin}: incentives.{key} contains a non-number") from None
    return a, b, c


def load_parameters(path: str | Path | None = None) -> list[PairParams]:
    """Load driver parameters from YAML; None loads the packaged defaults.

    The file holds one shared pair of incentive slope triples plus, per
    participant pair, base thresholds for the left and the right driver.
    Raises ParameterError with the offending field on any malformed input.
    """
    if path is None:
        origin = "<packaged defaults>"
        text = (
            importlib.resources.files("ceimerge") / "data" / "default_params.yaml"
        ).read_text()
    else:
        origin = str(path)
        text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParameterError(f"{origin}: invalid YAML: {exc}") from exc
    _require(isinstance(data, dict), origin, "top level must be a mapping")
    _require("incentives" in data, origin, "missing 'incentives' section")
    _require("pairs" in data, origin, "missing 'pairs' section")
    inc = data["incentives"]
    _require(isinstance(inc, dict), origin, "'incentives' must be a mapping")
    _require("upper" in inc and "lower" in inc, origin, "incentives need 'upper' and 'lower'")
    lambda_u = _parse_slopes(inc["upper"], origin, "upper")
    lambda_l = _parse_slopes(inc["lower"], origin, "lower")

    entries = data["pairs"]
    _require(isinstance(entries, list) and entries, origin, "'pairs' must be a non-empty list")
    pairs: list[PairParams] = []
    seen: set[str] = set()
    for i, entry in enumerate(entries):
        where = f"pairs[{i}]"
        _require(isinstance(entry, dict), origin, f"{where} must be a mapping")
        _require("pair" in entry, origin, f"{where} is missing 'pair'")
        label = str(entry["pair"])
        _require(label not in seen, origin, f"duplicate pair label {label!r}")
        seen.add(label)
        sides = {}
        for side in ("left", "right"):
            _require(side in entry, origin, f"{where} is missing '{side}'")
            node = entry[side]
            _require(isinstance(node, dict), origin, f"{where}.{side} must be a mapping")
            for key in ("theta_l", "theta_u"):
                _require(key in node, origin, f"{where}.{side} is missing '{key}'")
            try:
                theta_l = float(node["theta_l"])
                theta_u = float(node["theta_u"])
            except (TypeError, ValueError):
                raise ParameterError(
                    f"{origin}: {where}.{side} thresholds must be numbers"
                ) from None
            _require(
                0.0 < theta_l < theta_u < 1.0,
                origin,
                f"{where}.{side} needs 0 < theta_l < theta_u < 1",
            )
            sides[side] = RiskThresholds(theta_l, theta_u, lambda_l=lambda_l, lambda_u=lambda_u)
        pairs.append(PairParams(label, sides["left"], sides["right"]))
    return pairs


def save_parameters(pairs: Sequence[PairParams], path: str | Path) -> None:
    """Write pairs back to the YAML layout load_parameters reads."""
    uppers = {p.left.lambda_u for p in pairs} | {p.right.lambda_u for p in pairs}
    lowers = {p.left.lambda_l for p in pairs} | {p.right.lambda_l for p in pairs}
    if len(uppers) != 1 or len(lowers) != 1:
        raise ParameterError("pairs disagree on incentive slopes; cannot serialise")
    doc = {
        "incentives": {
            "upper": [float(x) for x in next(iter(uppers))],
            "lower": [float(x) for x in next(iter(lowers))],
        },
        "pairs": [
            {
                "pair": p.label,
                "left": {"theta_l": float(p.left.theta_l), "theta_u": float(p.left.theta_u)},
                "right": {"theta_l": float(p.right.theta_l), "theta_u": float(p.right.theta_u)},
            }
            for p in pairs
        ],
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


class Agent:
    """One modelled driver: perception, belief, risk appraisal, re-planning.

    With rng=None the driver runs noise-free and fully deterministically;
    otherwise the generator feeds the velocity-perception diffusion (one
    draw per step) and the execution noise (one draw per adopted plan).
    """

    def __init__(
        self,
        side: str,
        thresholds: RiskThresholds,
        desired_velocity: float,
        other_initial_velocity: float,
        condition: Condition,
        cst: ModelConstants,
        track: Track,
        rng: np.random.Generator | None = None,
    ):
        self.side = side
        self.thresholds = thresholds
        self.v_d = desired_velocity
        self.cst = cst
        self.track = track
        self.rng = rng
        self.percept = PerceivedOther(other_initial_velocity, cst.memory_steps)
        self.cond_dp, self.cond_dv = condition.covariates(side)
        self.plan: Plan | None = None
        self.below_since: int | None = None  # step where risk last dropped under rho_l
        self.prev_verr = 0.0
        self._noise_std = math.sqrt(cst.dt)

    @property
    def commanded(self) -> float:
        return self.plan.commanded

    @property
    def executed(self) -> float:
        return self.plan.executed

    @property
    def perceived_velocity(self) -> float:
        return self.percept.velocity

    def observe(self, step: int, other: VehicleState) -> None:
        """Take the start-of-step measurement of the other vehicle."""
        if step > 0:
            noise = 0.0 if self.rng is None else float(self.rng.normal(0.0, self._noise_std))
            self.percept.update_velocity(
                other.velocity,
                self.cst.velocity_update_rate,
                self.cst.velocity_noise_gain,
                noise,
                self.cst.dt,
                self.cst.perception_update,
            )
        self.percept.push_acceleration(step, other.net_acceleration)

    def act(
        self, step: int, now: float, own: VehicleState, other: VehicleState, first: bool
    ) -> tuple[float, float, float, str]:
        """Appraise risk against the current plan, re-plan when triggered.

        Returns (risk, rho_lower, rho_upper, replan_code); the command to
        execute is read from self.plan afterwards.  replan_code is "" on
        steps where the current plan is kept.
        """
        cst = self.cst
        expectation = expected_acceleration(
            self.percept.memory.values(), cst.comfortable_accel
        )
        belief = build_belief(
            now,
            other.front,
            self.percept.velocity,
            expectation,
            cst.horizon,
            cst.belief_frequency,
            cst.variance_scale,
            cst.projection_law,
        )
        if cst.risk_reference == "condition":
            dp, dv = self.cond_dp, self.cond_dv
        elif cst.risk_reference == "perceived":
            # positions are read exactly; the velocity estimate is not
            dp = own.front - other.front
            dv = own.velocity - self.percept.velocity
        else:
            dp = own.front - other.front
            dv = own.velocity - other.velocity
        rho_l, rho_u = evaluate_thresholds(self.thresholds, dp, dv)

        if first:
            free = optimize_plan(
                own.front, own.velocity, now, belief, self.track, self.v_d, cst, None, "none"
            )
            risk = free.risk_at_creation
            if risk > rho_u:
                plan = optimize_plan(
                    own.front,
                    own.velocity,
                    now,
                    belief,
                    self.track,
                    self.v_d,
                    cst,
                    0.8 * rho_l,
                    "upper",
                )
                if plan is None:
                    plan = fallback_plan(
                        own.front,
                        own.velocity,
                        now,
                        other.front,
                        belief,
                        self.track,
                        self.v_d,
                        cst,
                        "upper",
                    )
            else:
                plan = free
            self._adopt(plan)
            self.prev_verr = own.velocity - self.v_d
            code = "initial" if plan.fallback is None else f"initial+{plan.fallback}"
            return risk, rho_l, rho_u, code

        # risk of sticking to the current intention from the current state
        positions, _, _ = rollout(own.front, own.velocity, self.plan.commanded, self.v_d, cst)
        risk = perceived_risk(positions, belief, self.track)

        if risk < rho_l:
            if self.below_since is None:
                self.below_since = step
        else:
            self.below_since = None

        verr = own.velocity - self.v_d
        crossed = (self.prev_verr * verr < 0.0) or (verr == 0.0 and self.prev_verr != 0.0)

        trigger: tuple[str, str] | None = None
        if self.plan.fallback is not None:
            trigger = ("retry", self.plan.constraint_used)
        elif risk > rho_u:
            trigger = ("upper", "upper")
        elif self.below_since is not None and step - self.below_since >= cst.saturation_steps:
            trigger = ("lower", "lower")
        elif crossed and self.plan.executed != 0.0:
            trigger = ("velocity", self.plan.constraint_used)

        code = ""
        if trigger is not None:
            code, kind = trigger
            ceiling = self._ceiling(kind, rho_l, rho_u)
            plan = optimize_plan(
                own.front, own.velocity, now, belief, self.track, self.v_d, cst, ceiling, kind
            )
            if plan is None:
                plan = fallback_plan(
                    own.front, own.velocity, now, other.front, belief, self.track,
                    self.v_d, cst, kind,
                )
            self._adopt(plan)
            if plan.fallback is not None:
                code = f"{code}+{plan.fallback}"
        self.prev_verr = verr
        return risk, rho_l, rho_u, code

    @staticmethod
    def _ceiling(kind: str, rho_l: float, rho_u: float) -> float | None:
        # emergency plans aim well under the lower threshold, relaxation
        # plans may climb back toward (but not onto) the upper one
        if kind == "upper":
            return 0.8 * rho_l
        if kind == "lower":
            return 0.6 * rho_u
        return None

    def _adopt(self, plan: Plan) -> None:
        if self.rng is not None:
            eps = float(self.rng.normal(0.0, self.cst.execution_noise_std))
            plan.executed = apply_execution_noise(plan.commanded, eps, self.cst)
        self.plan = plan
        self.below_since = None


class ConstantVelocityDriver:
    """Scripted opponent whose command cancels resistance exactly.

    The net acceleration is identically zero, so the velocity stays
    bitwise constant.  Used by the calibration grids to probe a single
    modelled driver against a fully predictable partner.
    """

    def __init__(self, velocity: float):
        self.commanded = resistance(velocity)
        self.executed = self.commanded
        self.perceived_velocity = math.nan
        self.plan = None

    def observe(self, step: int, other: VehicleState) -> None:
        pass

    def act(
        self, step: int, now: float, own: VehicleState, other: VehicleState, first: bool
    ) -> tuple[float, float, float, str]:
        self.commanded = resistance(own.velocity)
        self.executed = self.commanded
        return math.nan, math.nan, math.nan, ""


@dataclass
class SideLog:
    """Per-step series for one driver of a trial."""

    initial_velocity: float
    front: np.ndarray
    velocity: np.ndarray
    net_accel: np.ndarray
    commanded: np.ndarray
    executed: np.ndarray
    perceived_other_velocity: np.ndarray
    risk: np.ndarray
    rho_lower: np.ndarray
    rho_upper: np.ndarray
    replan: list[str]


@dataclass
class TrialLog:
    """Everything recorded about one trial."""

    condition: Condition
    pair: str
    repetition: int
    seed: int | None
    mode: str
    source: str
    outcome: str  # completed | collision | timeout | truncated
    collision_time: float | None
    tunnel_exit_time: float | None
    track: Track
    t: np.ndarray
    left: SideLog
    right: SideLog
    # sides driven by a scripted vehicle instead of a modelled driver
    scripted: tuple[str, ...] = ()

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])


_SIDE_FIELDS = (
    "front",
    "velocity",
    "net_accel",
    "commanded",
    "executed",
    "perceived_other_velocity",
    "risk",
    "rho_lower",
    "rho_upper",
    "replan",
)


def run_trial(
    condition: Condition | str,
    pair: PairParams,
    seed: int = 0,
    mode: str = "stochastic",
    constants: ModelConstants | None = None,
    track: Track | None = None,
    repetition: int = 0,
    opponent: str = "model",
    stop_after_exit: float | None = None,
) -> TrialLog:
    """Simulate one trial and return its full log.

    mode "stochastic" derives two independent noise streams from the seed
    (one per driver); "deterministic" disables all noise and ignores the
    seed.  opponent "constant" replaces the right driver by a scripted
    constant-velocity vehicle ("constant_left" replaces the left one
    instead).  stop_after_exit truncates the trial that many seconds
    after the tunnel exit, for calibration probes.
    """
    if isinstance(condition, str):
        condition = Condition.from_label(condition)
    cst = constants if constants is not None else ModelConstants()
    track = track if track is not None else Track()
    if mode not in ("stochastic", "deterministic"):
        raise ValueError(f"unknown mode {mode!r}")
    if opponent not in ("model", "constant", "constant_left"):
        raise ValueError(f"unknown opponent {opponent!r}")

    state_l, state_r = initial_states(condition, track)
    v0_l, v0_r = state_l.velocity, state_r.velocity

    if mode == "stochastic":
        child_l, child_r = np.random.SeedSequence(seed).spawn(2)
        rng_l: np.random.Generator | None = np.random.default_rng(child_l)
        rng_r: np.random.Generator | None = np.random.default_rng(child_r)
    else:
        rng_l = rng_r = None

    if opponent == "constant_left":
        driver_l: Agent | ConstantVelocityDriver = ConstantVelocityDriver(v0_l)
    else:
        driver_l = Agent("left", pair.left, v0_l, v0_r, condition, cst, track, rng_l)
    if opponent == "constant":
        driver_r: Agent | ConstantVelocityDriver = ConstantVelocityDriver(v0_r)
    else:
        driver_r = Agent("right", pair.right, v0_r, v0_l, condition, cst, track, rng_r)
    scripted: tuple[str, ...] = ()
    if opponent == "constant":
        scripted = ("right",)
    elif opponent == "constant_left":
        scripted = ("left",)

    n_steps = int(round(cst.trial_timeout / cst.dt))
    times: list[float] = []
    cols = {
        "left": {name: [] for name in _SIDE_FIELDS},
        "right": {name: [] for name in _SIDE_FIELDS},
    }

    def log_row(t, s_l, s_r, d_l, d_r):
        times.append(t)
        for side, state, driver, diag in (
            ("left", s_l, driver_l, d_l),
            ("right", s_r, driver_r, d_r),
        ):
            risk, rho_l, rho_u, code, cmd, exe = diag
            c = cols[side]
            c["front"].append(state.front)
            c["velocity"].append(state.velocity)
            c["net_accel"].append(state.net_acceleration)
            c["commanded"].append(cmd)
            c["executed"].append(exe)
            c["perceived_other_velocity"].append(driver.perceived_velocity)
            c["risk"].append(risk)
            c["rho_lower"].append(rho_l)
            c["rho_upper"].append(rho_u)
            c["replan"].append(code)

    control_active = False
    exit_time: float | None = None
    outcome = "timeout"
    collision_time: float | None = None
    idle = (math.nan, math.nan, math.nan, "", 0.0, 0.0)

    for step in range(n_steps):
        t = step * cst.dt
        first = False
        if not control_active and state_l.front >= track.tunnel_length and state_r.front >= track.tunnel_length:
            control_active = True
            first = True
            exit_time = t

        driver_l.observe(step, state_r)
        driver_r.observe(step, state_l)

        if control_active:
            risk_l, rl_l, ru_l, code_l = driver_l.act(step, t, state_l, state_r, first)
            risk_r, rl_r, ru_r, code_r = driver_r.act(step, t, state_r, state_l, first)
            diag_l = (risk_l, rl_l, ru_l, code_l, driver_l.commanded, driver_l.executed)
            diag_r = (risk_r, rl_r, ru_r, code_r, driver_r.commanded, driver_r.executed)
        else:
            diag_l = diag_r = idle
        log_row(t, state_l, state_r, diag_l, diag_r)

        exe_l = diag_l[5]
        exe_r = diag_r[5]
        state_l = step_dynamics(state_l, exe_l, cst.dt, in_tunnel=not control_active)
        state_r = step_dynamics(state_r, exe_r, cst.dt, in_tunnel=not control_active)

        if detect_collision(state_l, state_r, track):
            outcome = "collision"
            collision_time = (step + 1) * cst.dt
            break
        if min(state_l.front, state_r.front) - track.vehicle_length > track.total_length:
            outcome = "completed"
            break
        if (
            stop_after_exit is not None
            and exit_time is not None
            and (step + 1) * cst.dt - exit_time >= stop_after_exit - 1e-9
        ):
            outcome = "truncated"
            break

    # terminal snapshot: state only, no decision attached
    terminal = (math.nan, math.nan, math.nan, "", math.nan, math.nan)
    log_row(len(times) * cst.dt, state_l, state_r, terminal, terminal)

    def side_log(side: str, v0: float) -> SideLog:
        c = cols[side]
        return SideLog(
            initial_velocity=v0,
            front=np.asarray(c["front"]),
            velocity=np.asarray(c["velocity"]),
            net_accel=np.asarray(c["net_accel"]),
            commanded=np.asarray(c["commanded"]),
            executed=np.asarray(c["executed"]),
            perceived_other_velocity=np.asarray(c["perceived_other_velocity"]),
            risk=np.asarray(c["risk"]),
            rho_lower=np.asarray(c["rho_lower"]),
            rho_upper=np.asarray(c["rho_upper"]),
            replan=c["replan"],
        )

    return TrialLog(
        condition=condition,
        pair=pair.label,
        repetition=repetition,
        seed=seed if mode == "stochastic" else None,
        mode=mode,
        source="model",
        outcome=outcome,
        collision_time=collision_time,
        tunnel_exit_time=exit_time,
        track=track,
        t=np.asarray(times),
        left=side_log("left", v0_l),
        right=side_log("right", v0_r),
        scripted=scripted,
    )


def derive_seed(base_seed: int, pair_label: str, condition_label: str, repetition: int) -> int:
    """Stable per-trial seed, independent of scheduling and worker count."""
    key = f"{base_seed}|{pair_label}|{condition_label}|{repetition}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def _trial_task(args) -> TrialLog:
    condition, pair, repetition, seed, mode, cst, track = args
    return run_trial(
        condition,
        pair,
        seed=seed,
        mode=mode,
        constants=cst,
        track=track,
        repetition=repetition,
    )


def run_batch(
    pairs: Sequence[PairParams],
    conditions: Sequence[Condition | str] | None = None,
    repetitions: int = 10,
    base_seed: int = 0,
    mode: str = "stochastic",
    constants: ModelConstants | None = None,
    track: Track | None = None,
    workers: int | None = 1,
) -> list[TrialLog]:
    """Run pairs x conditions x repetitions trials.

    Every trial's seed is derived from (base_seed, pair, condition,
    repetition), so the results and their order are identical for any
    worker count.  workers None or 0 uses all cores.
    """
    cst = constants if constants is not None else ModelConstants()
    track = track if track is not None else Track()
    if conditions is None:
        conditions = DEFAULT_CONDITIONS
    conds = [Condition.from_label(c) if isinstance(c, str) else c for c in conditions]
    tasks = []
    for pair in pairs:
        for cond in conds:
            for rep in range(repetitions):
                seed = derive_seed(base_seed, pair.label, cond.label, rep)
                tasks.append((cond, pair, rep, seed, mode, cst, track))
    if not workers:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(tasks) <= 1:
        return [_trial_task(task) for task in tasks]
    chunk = max(1, len(tasks) // (workers * 8))
    with multiprocessing.Pool(processes=workers) as pool:
        return pool.map(_trial_task, tasks, chunksize=chunk)


_TRIAL_MAGIC = "# ceimerge-trial v1"

_COLUMNS = ["t"] + [
    f"{side}_{name}" for side in ("left", "right") for name in _SIDE_FIELDS
]


def save_trial_log(log: TrialLog, path: str | Path) -> None:
    """Write a trial log as CSV with a two-line metadata preamble."""
    meta = {
        "schema": 2,
        "condition": log.condition.label,
        "pair": log.pair,
        "repetition": log.repetition,
        "seed": log.seed,
        "mode": log.mode,
        "source": log.source,
        "outcome": log.outcome,
        "collision_time": log.collision_time,
        "tunnel_exit_time": log.tunnel_exit_time,
        "scripted": list(log.scripted),
        "initial_velocity_left": log.left.initial_velocity,
        "initial_velocity_right": log.right.initial_velocity,
        "track": {
            "tunnel_length": log.track.tunnel_length,
            "approach_length": log.track.approach_length,
            "follow_length": log.track.follow_length,
            "vehicle_length": log.track.vehicle_length,
            "vehicle_width": log.track.vehicle_width,
        },
    }
    lines = [_TRIAL_MAGIC, "# " + json.dumps(meta), ",".join(_COLUMNS)]
    series = [log.t.tolist()]
    codes: dict[int, list[str]] = {}
    for side in (log.left, log.right):
        for name in _SIDE_FIELDS:
            value = getattr(side, name)
            if name == "replan":
                codes[len(series)] = value
                series.append(None)
            else:
                series.append(value.tolist())
    n = len(log.t)
    for i in range(n):
        parts = []
        for j, column in enumerate(series):
            parts.append(codes[j][i] if column is None else repr(column[i]))
        lines.append(",".join(parts))
    Path(path).write_text("\n".join(lines) + "\n")


def load_trial_log(path: str | Path) -> TrialLog:
    """Read back a CSV trial log written by save_trial_log."""
    lines = Path(path).read_text().splitlines()
    if len(lines) < 4 or lines[0].strip() != _TRIAL_MAGIC:
        raise TrialFormatError(f"{path}: missing '{_TRIAL_MAGIC}' signature")
    if not lines[1].startswith("# "):
        raise TrialFormatError(f"{path}: missing metadata line")
    try:
        meta = json.loads(lines[1][2:])
    except json.JSONDecodeError as exc:
        raise TrialFormatError(f"{path}: metadata is not valid JSON: {exc}") from exc
    schema = int(meta.get("schema", 1))
    if schema > 2:
        raise TrialFormatError(f"{path}: schema {schema} is newer than this reader")
    if lines[2].split(",") != _COLUMNS:
        raise TrialFormatError(f"{path}: unexpected column header")

    replan_idx = {_COLUMNS.index("left_replan"), _COLUMNS.index("right_replan")}
    rows = [line.split(",") for line in lines[3:] if line]
    for row in rows:
        if len(row) != len(_COLUMNS):
            raise TrialFormatError(f"{path}: row with {len(row)} fields, expected {len(_COLUMNS)}")
    columns: list = []
    for j in range(len(_COLUMNS)):
        if j in replan_idx:
            columns.append([row[j] for row in rows])
        else:
            try:
                columns.append(np.array([float(row[j]) for row in rows]))
            except ValueError as exc:
                raise TrialFormatError(f"{path}: non-numeric value in {_COLUMNS[j]}") from exc

    tr = meta.get("track", {})
    track = Track(
        tunnel_length=float(tr.get("tunnel_length", 50.0)),
        approach_length=float(tr.get("approach_length", 50.0)),
        follow_length=float(tr.get("follow_length", 50.0)),
        vehicle_length=float(tr.get("vehicle_length", 4.5)),
        vehicle_width=float(tr.get("vehicle_width", 1.8)),
    )

    def side_log(offset: int, v0: float) -> SideLog:
        return SideLog(
            initial_velocity=v0,
            front=columns[offset],
            velocity=columns[offset + 1],
            net_accel=columns[offset + 2],
            commanded=columns[offset + 3],
            executed=columns[offset + 4],
            perceived_other_velocity=columns[offset + 5],
            risk=columns[offset + 6],
            rho_lower=columns[offset + 7],
            rho_upper=columns[offset + 8],
            replan=columns[offset + 9],
        )

    n_side = len(_SIDE_FIELDS)
    return TrialLog(
        condition=Condition.from_label(meta["condition"]),
        pair=str(meta.get("pair", "?")),
        repetition=int(meta.get("repetition", 0)),
        seed=meta.get("seed"),
        mode=str(meta.get("mode", "stochastic")),
        source=str(meta.get("source", "model")),
        outcome=str(meta.get("outcome", "completed")),
        collision_time=meta.get("collision_time"),
        tunnel_exit_time=meta.get("tunnel_exit_time"),
        track=track,
        t=columns[0],
        left=side_log(1, float(meta.get("initial_velocity_left", math.nan))),
        right=side_log(1 + n_side, float(meta.get("initial_velocity_right", math.nan))),
        scripted=tuple(meta.get("scripted", ())),
    )


def code_version() -> str:
    """Short hash of the installed package sources, for cache invalidation."""
    root = Path(__file__).resolve().parent
    digest = hashlib.sha256()
    for p in sorted(root.rglob("*.py")) + sorted(root.rglob("*.yaml")):
        digest.update(p.relative_to(root).as_posix().encode())
        digest.update(b"\0")
        digest.update(p.read_bytes())
    return digest.hexdigest()[:16]
