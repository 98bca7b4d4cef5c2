"""Shared model constants and their derived step counts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class ModelConstants:
    """All fixed model constants, with step-count fields derived at init.

    Times are seconds, distances meters.  The derived counts keep every
    periodic mechanism (belief cadence, memory span, saturation timer) on
    exact step boundaries so no floating-point time comparison is needed.
    """

    horizon: float = 6.0                 # planning and belief lookahead
    dt: float = 0.05                     # simulation step
    memory_span: float = 4.0             # acceleration history window
    belief_frequency: float = 4.0        # belief points per second
    execution_noise_std: float = 1.0 / 40.0
    velocity_update_rate: float = 0.5    # perceived-velocity relaxation, 1/s
    velocity_noise_gain: float = 0.6     # perceived-velocity diffusion gain
    perception_update: str = "rate"      # "rate": relaxation scaled by dt; "step": full rate per step
    projection_law: str = "quadratic"    # belief spread growth over lookahead time
    saturation_time: float = 1.6         # dwell below the lower threshold before re-plan
    variance_scale: float = 3.0          # widening of the second mixture component
    comfortable_accel: float = 1.0       # scales the projection variance floor
    max_accel: float = 4.0               # command bound, symmetric
    trial_timeout: float = 60.0
    coarse_grid_points: int = 81         # planner scan resolution
    refine_tolerance: float = 1e-6       # planner refinement width
    risk_reference: str = "perceived"    # covariates feeding the incentives
    noise_model: str = "additive"        # execution noise form

    horizon_steps: int = field(init=False)
    sample_every: int = field(init=False)
    belief_points: int = field(init=False)
    memory_steps: int = field(init=False)
    saturation_steps: int = field(init=False)

    def __post_init__(self):
        self.horizon_steps = int(round(self.horizon / self.dt))
        self.sample_every = int(round(1.0 / (self.belief_frequency * self.dt)))
        if abs(self.sample_every * self.dt * self.belief_frequency - 1.0) > 1e-9:
            raise ValueError("belief interval must be a whole number of steps")
        self.belief_points = int(math.floor(self.horizon * self.belief_frequency))
        if self.belief_points < 1:
            raise ValueError("horizon too short for one belief point")
        if self.belief_points * self.sample_every > self.horizon_steps:
            raise ValueError("belief points extend past the planning horizon")
        self.memory_steps = int(round(self.memory_span / self.dt))
        self.saturation_steps = int(round(self.saturation_time / self.dt))
        if self.risk_reference not in ("instantaneous", "perceived", "condition"):
            raise ValueError(f"unknown risk_reference {self.risk_reference!r}")
        if self.noise_model not in ("additive", "multiplicative"):
            raise ValueError(f"unknown noise_model {self.noise_model!r}")
        if self.perception_update not in ("rate", "step"):
            raise ValueError(f"unknown perception_update {self.perception_update!r}")
        if self.projection_law not in ("quadratic", "linear"):
            raise ValueError(f"unknown projection_law {self.projection_law!r}")
