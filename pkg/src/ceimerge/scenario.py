"""Merging scenario: track geometry, experimental conditions and point-mass dynamics.

Two vehicles approach a merge point on separate roads of equal length that
join into a single lane.  Positions of both vehicles are measured along
their own road with a shared coordinate, so the merge point sits at the
same value for both.  Each trial starts inside a tunnel section in which
the vehicles travel at constant velocity and the drivers cannot act yet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

BASE_VELOCITY = 10.0  # speed around which all conditions are constructed [m/s]


@dataclass(frozen=True)
class Track:
    """Geometry of the merging track, lengths in meters."""

    tunnel_length: float = 50.0
    approach_length: float = 50.0
    follow_length: float = 50.0
    vehicle_length: float = 4.5
    vehicle_width: float = 1.8

    @property
    def merge_point(self) -> float:
        return self.tunnel_length + self.approach_length

    @property
    def total_length(self) -> float:
        return self.tunnel_length + self.approach_length + self.follow_length


@dataclass
class VehicleState:
    """Point-mass state; front is the position of the front bumper."""

    front: float
    velocity: float
    net_acceleration: float = 0.0
    commanded_acceleration: float = 0.0


@dataclass(frozen=True)
class Condition:
    """One experimental condition.

    projected_headway is the front-to-front distance (m) at the instant the
    advantaged vehicle would reach the merge point if both kept their initial
    velocity.  relative_velocity is v_left - v_right (m/s).  Positive values
    of either mean an advantage for the left driver.
    """

    projected_headway: float
    relative_velocity: float

    @property
    def label(self) -> str:
        return f"{self.projected_headway:g}_{round(self.relative_velocity * 10):g}"

    @classmethod
    def from_label(cls, label: str) -> "Condition":
        parts = label.split("_")
        if len(parts) != 2:
            raise ValueError(f"malformed condition label {label!r}")
        try:
            headway = float(parts[0])
            dv = float(parts[1]) / 10.0
        except ValueError as exc:
            raise ValueError(f"malformed condition label {label!r}") from exc
        return cls(headway, dv)

    def mirrored(self) -> "Condition":
        # adding 0.0 normalises -0.0 so mirrored labels round-trip
        return Condition(-self.projected_headway + 0.0, -self.relative_velocity + 0.0)

    @property
    def velocity_left(self) -> float:
        return BASE_VELOCITY + self.relative_velocity / 2.0

    @property
    def velocity_right(self) -> float:
        return BASE_VELOCITY - self.relative_velocity / 2.0

    def covariates(self, side: str) -> tuple[float, float]:
        """Headway and velocity-difference covariates from one driver's view."""
        if side == "left":
            return self.projected_headway, self.relative_velocity
        if side == "right":
            return -self.projected_headway, -self.relative_velocity
        raise ValueError(f"unknown side {side!r}")


# The experiment crosses projected headway {-4,-2,0,2,4} m with relative
# velocity {-0.8,0,0.8} m/s but runs only 11 of the 15 combinations.  The
# intermediate headways are probed at equal velocities only; the velocity
# manipulation is applied at headway 0 and at the extreme headways.  The
# list is closed under mirroring.
DEFAULT_CONDITIONS = [
    "0_0",
    "0_8",
    "0_-8",
    "2_0",
    "-2_0",
    "4_0",
    "-4_0",
    "4_8",
    "4_-8",
    "-4_8",
    "-4_-8",
]

ALL_CONDITIONS = [
    f"{h}_{dv}" for h in (-4, -2, 0, 2, 4) for dv in (-8, 0, 8)
]


def resistance(velocity: float) -> float:
    """Driving resistance opposing motion, 0.5 + 0.005 v^2 [m/s^2]."""
    return 0.5 + 0.005 * velocity * velocity


def step_dynamics(
    state: VehicleState, commanded: float, dt: float, in_tunnel: bool = False
) -> VehicleState:
    """Advance one vehicle by one step of semi-implicit Euler.

    Inside the tunnel the velocity is held constant and resistance does not
    apply (the trial has not handed control to the drivers yet).  Outside,
    the realised net acceleration is the command minus resistance, and the
    velocity is clamped at zero so the vehicle never rolls backwards.
    """
    if in_tunnel:
        return VehicleState(
            state.front + state.velocity * dt, state.velocity, 0.0, commanded
        )
    net = commanded - resistance(state.velocity)
    v_new = state.velocity + net * dt
    if v_new < 0.0:
        v_new = 0.0
    return VehicleState(
        state.front + v_new * dt,
        v_new,
        (v_new - state.velocity) / dt,
        commanded,
    )


def initial_states(
    condition: Condition, track: Track | None = None
) -> tuple[VehicleState, VehicleState]:
    """Initial vehicle states realising a condition.

    Velocities split the base speed by half the relative velocity.  The
    disadvantaged vehicle starts with its front at 0 and the other vehicle
    is placed so that, extrapolating both at constant velocity, the
    projected headway is met at the instant the advantaged front reaches
    the merge point.  If that placement would push the advantaged vehicle
    behind the track origin, both are shifted so the rearmost front is 0.
    On a full tie both start at 0.
    """
    track = track or Track()
    m_p = track.merge_point
    h = condition.projected_headway
    dv = condition.relative_velocity
    v_l = condition.velocity_left
    v_r = condition.velocity_right
    if h > 0.0 or (h == 0.0 and dv > 0.0):
        # left is advantaged, pin the right front at 0
        t_star = (m_p - h) / v_r
        p_l = m_p - v_l * t_star
        p_r = 0.0
    elif h < 0.0 or (h == 0.0 and dv < 0.0):
        # mirrored case, pin the left front at 0
        t_star = (m_p + h) / v_l
        p_r = m_p - v_r * t_star
        p_l = 0.0
    else:
        p_l = 0.0
        p_r = 0.0
    rear = min(p_l, p_r)
    if rear < 0.0:
        p_l -= rear
        p_r -= rear
    return VehicleState(p_l, v_l), VehicleState(p_r, v_r)


def collision_bounds(
    ego_front: float, track: Track | None = None
) -> tuple[float, float] | None:
    """Other-vehicle front positions that would collide with the ego vehicle.

    Bodies can only touch inside the merged lane, which requires the
    trailing front to have passed the merge point.  With the ego front at
    or before the merge point no other-vehicle position collides and the
    result is None.  Beyond it, the interval is open on both ends.
    """
    track = track or Track()
    m_p = track.merge_point
    if ego_front <= m_p:
        return None
    lo = ego_front - track.vehicle_length
    if lo < m_p:
        lo = m_p
    return lo, ego_front + track.vehicle_length


def detect_collision(
    left: VehicleState, right: VehicleState, track: Track | None = None
) -> bool:
    """True when the two bodies overlap inside the merged lane.

    Same predicate as collision_bounds: front-to-front distance below one
    vehicle length while the trailing front has passed the merge point.
    Symmetric in its arguments.
    """
    track = track or Track()
    bounds = collision_bounds(left.front, track)
    if bounds is None:
        return False
    return bounds[0] < right.front < bounds[1]
