"""Perception of the other vehicle: noisy velocity estimate and acceleration memory."""

from __future__ import annotations

from collections import deque

import numpy as np


def update_perceived_velocity(
    previous: float,
    true_velocity: float,
    update_rate: float,
    noise_gain: float,
    noise: float,
    dt: float = 1.0,
    mode: str = "rate",
) -> float:
    """One step of the perceived-velocity recurrence.

    In "rate" mode the estimate relaxes towards the true velocity at
    update_rate per second (drift update_rate * dt per step), giving a
    relaxation time constant of 1 / update_rate.  In "step" mode the
    full rate is applied every step regardless of dt, which converges
    within a few steps.  Both add noise_gain times a Wiener increment;
    callers draw it from N(0, dt) per simulation step, and passing 0
    gives the noise-free recurrence.
    """
    if mode == "rate":
        drift = update_rate * dt * (true_velocity - previous)
    elif mode == "step":
        drift = update_rate * (true_velocity - previous)
    else:
        raise ValueError(f"unknown perception update mode {mode!r}")
    return previous + drift + noise_gain * noise


class AccelerationMemory:
    """Rolling window of observed accelerations spanning a fixed number of steps.

    Samples are keyed by integer step index so the eviction horizon is exact,
    independent of floating-point time arithmetic.  A window of w steps keeps
    w + 1 samples once full (both endpoints inclusive).
    """

    def __init__(self, window_steps: int):
        if window_steps < 0:
            raise ValueError("window_steps must be non-negative")
        self.window_steps = window_steps
        self._steps: deque[int] = deque()
        self._values: deque[float] = deque()

    def push(self, step: int, value: float) -> None:
        self._steps.append(step)
        self._values.append(value)
        horizon = step - self.window_steps
        while self._steps and self._steps[0] < horizon:
            self._steps.popleft()
            self._values.popleft()

    def __len__(self) -> int:
        return len(self._values)

    def values(self) -> np.ndarray:
        return np.asarray(self._values, dtype=float)


class PerceivedOther:
    """Everything one driver knows about the other vehicle's motion.

    Positions are observed exactly and are not stored here; this object
    tracks the noisy velocity estimate and the acceleration history that
    feed the belief construction.
    """

    def __init__(self, initial_velocity: float, window_steps: int):
        self.velocity = float(initial_velocity)
        self.memory = AccelerationMemory(window_steps)

    def update_velocity(
        self,
        true_velocity: float,
        update_rate: float,
        noise_gain: float,
        noise: float,
        dt: float = 1.0,
        mode: str = "rate",
    ) -> None:
        self.velocity = update_perceived_velocity(
            self.velocity, true_velocity, update_rate, noise_gain, noise, dt, mode
        )

    def push_acceleration(self, step: int, value: float) -> None:
        self.memory.push(step, value)
