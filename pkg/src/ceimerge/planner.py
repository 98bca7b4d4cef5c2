"""Constant-acceleration planning under a perceived-risk ceiling.

A plan is one commanded acceleration held over the whole horizon.  The
planner minimises a comfort-plus-tracking cost, optionally subject to the
plan's perceived risk staying at or below a ceiling.  The feasible set in
the acceleration line can be disconnected, so the search scans a coarse
grid, refines the boundary of every feasible run by bisection and the
interior by golden-section search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .belief import Belief
from .params import ModelConstants
from .risk import perceived_risk, perceived_risk_candidates
from .scenario import Track, resistance

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0  # golden-section step ratio
_COST_TIE = 1e-12  # relative cost difference treated as a tie


@dataclass
class Plan:
    """A constant-acceleration plan and its bookkeeping.

    commanded is the optimiser's output, executed the noise-perturbed value
    actually applied until the next re-plan.  constraint_used records which
    ceiling bound the optimisation ("none", "upper" or "lower") so later
    re-plans can reuse it.  fallback is None for optimised plans, otherwise
    "brake" or "accel".
    """

    commanded: float
    executed: float
    created_at: float
    constraint_used: str
    cost: float
    risk_at_creation: float
    waypoint_times: np.ndarray
    waypoint_positions: np.ndarray
    waypoint_velocities: np.ndarray
    fallback: str | None = None


def rollout(
    front: float,
    velocity: float,
    accel: float,
    desired_velocity: float,
    cst: ModelConstants,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Integrate one candidate acceleration over the horizon.

    Returns front positions and velocities sampled at the belief cadence,
    plus the plan cost: the sum over every step of the squared velocity
    error and the squared commanded acceleration.  Scalar reference
    implementation; the vectorised scan must match it step for step.
    """
    dt = cst.dt
    p = front
    v = velocity
    cost = 0.0
    a2 = accel * accel
    every = cst.sample_every
    positions = np.empty(cst.belief_points)
    velocities = np.empty(cst.belief_points)
    j = 0
    for k in range(1, cst.horizon_steps + 1):
        v = v + (accel - resistance(v)) * dt
        if v < 0.0:
            v = 0.0
        p = p + v * dt
        err = v - desired_velocity
        cost += err * err + a2
        if k % every == 0 and j < cst.belief_points:
            positions[j] = p
            velocities[j] = v
            j += 1
    return positions, velocities, cost


def rollout_candidates(
    front: float,
    velocity: float,
    accels: np.ndarray,
    desired_velocity: float,
    cst: ModelConstants,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised rollout for a batch of candidate accelerations.

    Returns positions of shape (len(accels), belief_points) and the cost
    vector.  Same integration as rollout.
    """
    dt = cst.dt
    v = np.full(accels.shape, velocity, dtype=float)
    p = np.full(accels.shape, front, dtype=float)
    cost = np.zeros(accels.shape, dtype=float)
    a2 = accels * accels
    positions = np.empty((len(accels), cst.belief_points))
    j = 0
    every = cst.sample_every
    for k in range(1, cst.horizon_steps + 1):
        v = v + (accels - (0.5 + 0.005 * v * v)) * dt
        np.maximum(v, 0.0, out=v)
        p = p + v * dt
        err = v - desired_velocity
        cost += err * err + a2
        if k % every == 0 and j < cst.belief_points:
            positions[:, j] = p
            j += 1
    return positions, cost


def plan_cost(
    velocity: float, accel: float, desired_velocity: float, cst: ModelConstants
) -> float:
    """Cost of holding one acceleration from a given velocity (position free)."""
    return rollout(0.0, velocity, accel, desired_velocity, cst)[2]


def _golden_min(fn, lo: float, hi: float, tol: float) -> float:
    """Golden-section minimiser for a unimodal function on [lo, hi]."""
    a, b = lo, hi
    h = b - a
    if h <= tol:
        return 0.5 * (a + b)
    c = b - _INVPHI * h
    d = a + _INVPHI * h
    fc = fn(c)
    fd = fn(d)
    while h > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = b - _INVPHI * h
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + _INVPHI * h
            fd = fn(d)
    return c if fc < fd else d


class _Evaluator:
    """Canonical scalar evaluation of candidates against one belief."""

    def __init__(self, front, velocity, belief, track, desired_velocity, cst):
        self.front = front
        self.velocity = velocity
        self.belief = belief
        self.track = track
        self.v_d = desired_velocity
        self.cst = cst

    def cost(self, accel: float) -> float:
        return plan_cost(self.velocity, accel, self.v_d, self.cst)

    def risk(self, accel: float) -> float:
        positions, _, _ = rollout(
            self.front, self.velocity, accel, self.v_d, self.cst
        )
        return perceived_risk(positions, self.belief, self.track)

    def _bisect_boundary(
        self, bad: float, good: float, ceiling: float
    ) -> float:
        """Move the feasible endpoint towards the infeasible one.

        bad violates the ceiling, good satisfies it.  Returns a feasible
        point within refine_tolerance of the true boundary.
        """
        for _ in range(60):
            if abs(bad - good) <= self.cst.refine_tolerance:
                break
            mid = 0.5 * (bad + good)
            if self.risk(mid) <= ceiling:
                good = mid
            else:
                bad = mid
        return good


def _pick(candidates: list[tuple[float, float]]) -> tuple[float, float]:
    """Lowest cost wins; near-equal costs go to the smaller magnitude."""
    best_a, best_c = candidates[0]
    for a, c in candidates[1:]:
        if c < best_c - _COST_TIE * max(1.0, abs(best_c)):
            best_a, best_c = a, c
        elif abs(c - best_c) <= _COST_TIE * max(1.0, abs(best_c)) and abs(a) < abs(
            best_a
        ):
            best_a, best_c = a, c
    return best_a, best_c


def optimize_plan(
    front: float,
    velocity: float,
    now: float,
    belief: Belief,
    track: Track,
    desired_velocity: float,
    cst: ModelConstants,
    ceiling: float | None,
    constraint_used: str,
) -> Plan | None:
    """Best constant acceleration, or None when no candidate meets the ceiling.

    With ceiling None the search is unconstrained.  Otherwise candidates
    are feasible when their perceived risk does not exceed the ceiling;
    each contiguous feasible run of the coarse grid is refined separately
    because the constrained optimum may sit on a feasibility boundary.
    """
    ev = _Evaluator(front, velocity, belief, track, desired_velocity, cst)
    grid = np.linspace(-cst.max_accel, cst.max_accel, cst.coarse_grid_points)
    positions, costs = rollout_candidates(
        front, velocity, grid, desired_velocity, cst
    )

    if ceiling is None:
        i = int(np.argmin(costs))
        ties = np.flatnonzero(costs <= costs[i] + _COST_TIE * max(1.0, costs[i]))
        i = int(ties[np.argmin(np.abs(grid[ties]))])
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, len(grid) - 1)]
        best = _golden_min(ev.cost, lo, hi, cst.refine_tolerance)
        a_final, _ = _pick([(grid[i], costs[i]), (best, ev.cost(best))])
        return _build(ev, a_final, now, "none")

    risks = perceived_risk_candidates(positions, belief, track)
    feasible = risks <= ceiling
    # the vectorised scan prunes, the canonical evaluator decides
    if not feasible.any():
        return None

    choices: list[tuple[float, float]] = []
    idx = np.flatnonzero(feasible)
    splits = np.flatnonzero(np.diff(idx) > 1)
    run_starts = np.concatenate(([0], splits + 1))
    run_ends = np.concatenate((splits, [len(idx) - 1]))
    for s, e in zip(run_starts, run_ends):
        i0, i1 = int(idx[s]), int(idx[e])
        if ev.risk(grid[i0]) > ceiling:
            # grid point feasible only under the vectorised arithmetic; skip
            if i0 == i1:
                continue
            i0 += 1
        lo = grid[i0] if i0 == 0 else ev._bisect_boundary(grid[i0 - 1], grid[i0], ceiling)
        hi = (
            grid[i1]
            if i1 == len(grid) - 1
            else ev._bisect_boundary(grid[i1 + 1], grid[i1], ceiling)
        )
        interior = _golden_min(ev.cost, lo, hi, cst.refine_tolerance)
        run_best: list[tuple[float, float]] = []
        for a in (lo, hi, interior):
            if ev.risk(a) <= ceiling:
                run_best.append((a, ev.cost(a)))
        for k in range(i0, i1 + 1):
            if ev.risk(grid[k]) <= ceiling:
                run_best.append((float(grid[k]), float(costs[k])))
                break
        if run_best:
            choices.append(_pick(run_best))
    if not choices:
        return None
    a_final, _ = _pick(choices)
    return _build(ev, a_final, now, constraint_used)


def _build(ev: _Evaluator, accel: float, now: float, constraint_used: str) -> Plan:
    positions, velocities, cost = rollout(
        ev.front, ev.velocity, accel, ev.v_d, ev.cst
    )
    times = now + np.arange(1, ev.cst.belief_points + 1) * (
        1.0 / ev.cst.belief_frequency
    )
    return Plan(
        commanded=float(accel),
        executed=float(accel),
        created_at=now,
        constraint_used=constraint_used,
        cost=float(cost),
        risk_at_creation=perceived_risk(positions, ev.belief, ev.track),
        waypoint_times=times,
        waypoint_positions=positions,
        waypoint_velocities=velocities,
    )


def fallback_plan(
    front: float,
    velocity: float,
    now: float,
    other_front: float,
    belief: Belief,
    track: Track,
    desired_velocity: float,
    cst: ModelConstants,
    constraint_used: str,
) -> Plan:
    """Evasive plan when no acceleration satisfies the ceiling.

    A vehicle ahead of the other escapes forward at full acceleration, a
    vehicle behind or level yields with a full brake.  The conflict is
    re-examined by the caller at every subsequent step.
    """
    if front > other_front:
        accel = cst.max_accel
        kind = "accel"
    else:
        accel = -cst.max_accel
        kind = "brake"
    ev = _Evaluator(front, velocity, belief, track, desired_velocity, cst)
    plan = _build(ev, accel, now, constraint_used)
    plan.fallback = kind
    return plan


def apply_execution_noise(commanded: float, epsilon: float, cst: ModelConstants) -> float:
    """Perturb a command by one frozen noise draw and clip to the command bound."""
    if cst.noise_model == "multiplicative":
        executed = commanded * (1.0 + epsilon)
    else:
        executed = commanded + epsilon
    return min(max(executed, -cst.max_accel), cst.max_accel)
