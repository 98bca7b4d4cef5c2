"""Perceived collision risk and the acting thresholds around it.

Risk is read off the belief: for each belief point, the mass of the
other-vehicle position distribution that falls inside the collision
bounds of the ego vehicle's planned position at that same time.  The
scalar risk of a plan is the maximum over the belief points, so a plan
is judged by its worst moment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .belief import Belief, mixture_mass, mixture_mass_array
from .scenario import Track, collision_bounds


@dataclass(frozen=True)
class RiskThresholds:
    """Base thresholds and incentive slopes for one driver.

    The lower and upper threshold delimit the comfortable risk band.
    Incentive slopes modulate each threshold linearly in the headway
    covariate, the velocity covariate and their product.
    """

    theta_l: float
    theta_u: float
    lambda_l: tuple[float, float, float] = (0.0, 0.0, 0.0)
    lambda_u: tuple[float, float, float] = (0.0, 0.0, 0.0)


def evaluate_thresholds(
    thresholds: RiskThresholds, dp: float, dv: float
) -> tuple[float, float]:
    """Effective (lower, upper) risk thresholds for covariates (dp, dv).

    Linear incentive form theta + l1 dp + l2 dv + l3 dp dv for each
    threshold, then clamped so that 0.001 <= lower <= upper - 0.001 and
    both stay strictly inside (0, 1).
    """
    lu = thresholds.lambda_u
    ll = thresholds.lambda_l
    rho_u = thresholds.theta_u + lu[0] * dp + lu[1] * dv + lu[2] * dp * dv
    rho_l = thresholds.theta_l + ll[0] * dp + ll[1] * dv + ll[2] * dp * dv
    rho_u = min(max(rho_u, 0.002), 0.999)
    rho_l = min(max(rho_l, 0.001), rho_u - 0.001)
    return rho_l, rho_u


def perceived_risk(
    ego_positions: np.ndarray, belief: Belief, track: Track
) -> float:
    """Scalar risk of an ego trajectory against a belief.

    ego_positions holds the planned ego front at each belief time, in the
    same order as the belief points.  Points whose collision bounds are
    empty (ego front not past the merge point) contribute zero.
    """
    if len(ego_positions) != len(belief):
        raise ValueError("ego trajectory and belief have different lengths")
    worst = 0.0
    means = belief.means
    sigmas = belief.sigmas
    scale = belief.variance_scale
    for i in range(len(means)):
        bounds = collision_bounds(ego_positions[i], track)
        if bounds is None:
            continue
        mass = mixture_mass(means[i], sigmas[i], scale, bounds[0], bounds[1])
        if mass > worst:
            worst = mass
    return worst


def perceived_risk_candidates(
    positions: np.ndarray, belief: Belief, track: Track
) -> np.ndarray:
    """Vectorised risk for a batch of candidate trajectories.

    positions has shape (n_candidates, n_belief_points).  Used by the
    planner's scan; semantics match perceived_risk.
    """
    m_p = track.merge_point
    length = track.vehicle_length
    lo = np.maximum(positions - length, m_p)
    hi = positions + length
    mass = mixture_mass_array(
        belief.means[None, :], belief.sigmas[None, :], belief.variance_scale, lo, hi
    )
    mass = np.where(positions > m_p, mass, 0.0)
    return mass.max(axis=1)
