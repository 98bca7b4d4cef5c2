"""Probabilistic belief about the other vehicle's future position.

The belief is a sequence of Gaussian mixtures over the other vehicle's
front position at fixed future times.  Each point mixes two zero-offset
components, one at the projected variance and one widened by a constant
factor, weighted half and half.  The projection assumes the acceleration
summarised from the observed history is held constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf as _erf_vec

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class AccelerationExpectation:
    """Summary of remembered accelerations: mean and floored variance."""

    mean: float
    variance: float


def expected_acceleration(samples, comfortable_accel: float) -> AccelerationExpectation:
    """Mean and variance of the acceleration history.

    The variance gets an additive floor of (comfortable_accel / 3)^2 so the
    projected uncertainty never collapses, plus the population variance of
    the remembered samples.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("acceleration history is empty")
    floor = (comfortable_accel / 3.0) ** 2
    return AccelerationExpectation(float(arr.mean()), floor + float(arr.var()))


def _projected_sigma(half_t2, variance: float, law: str):
    # quadratic: uncertain constant acceleration integrated twice, so the
    # position spread is (t^2/2) * sigma_a.  linear: spread grows with t
    # instead, a lighter-tailed alternative kept for comparison runs.
    if law == "quadratic":
        return half_t2 * math.sqrt(variance)
    if law == "linear":
        return np.sqrt(half_t2 * variance)
    raise ValueError(f"unknown projection law {law!r}")


def project_belief_point(
    horizon: float,
    front: float,
    perceived_velocity: float,
    expectation: AccelerationExpectation,
    law: str = "quadratic",
) -> tuple[float, float]:
    """Project mean and standard deviation 'horizon' seconds ahead.

    Constant-acceleration kinematics for the mean; the spread follows the
    selected projection law.
    """
    half_t2 = 0.5 * horizon * horizon
    mean = front + perceived_velocity * horizon + half_t2 * expectation.mean
    sigma = float(_projected_sigma(half_t2, expectation.variance, law))
    return mean, sigma


@dataclass
class Belief:
    """Belief points at a fixed cadence over the planning horizon.

    times holds absolute timestamps, means and sigmas the per-point
    Gaussian parameters, variance_scale the widening factor of the second
    mixture component.
    """

    start_time: float
    times: np.ndarray
    means: np.ndarray
    sigmas: np.ndarray
    variance_scale: float

    def __len__(self) -> int:
        return len(self.times)


def build_belief(
    start_time: float,
    front: float,
    perceived_velocity: float,
    expectation: AccelerationExpectation,
    horizon: float,
    frequency: float,
    variance_scale: float,
    law: str = "quadratic",
) -> Belief:
    """Build the belief point sequence starting one interval after start_time.

    floor(horizon * frequency) points spaced 1 / frequency apart, the last
    one at start_time + horizon when the horizon is a whole number of
    intervals.
    """
    count = int(math.floor(horizon * frequency))
    if count < 1:
        raise ValueError("horizon too short for one belief point")
    offsets = np.arange(1, count + 1) * (1.0 / frequency)
    half_t2 = 0.5 * offsets * offsets
    means = front + perceived_velocity * offsets + half_t2 * expectation.mean
    sigmas = _projected_sigma(half_t2, expectation.variance, law)
    return Belief(start_time, start_time + offsets, means, sigmas, variance_scale)


def _std_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / _SQRT2))


def mixture_mass(
    mean: float, sigma: float, variance_scale: float, lo: float, hi: float
) -> float:
    """Probability mass of one belief point inside the open interval (lo, hi).

    The point is an equal-weight mixture of N(mean, sigma^2) and
    N(mean, variance_scale * sigma^2).  A degenerate point (sigma == 0)
    reduces to an indicator on the interval.
    """
    if hi <= lo:
        return 0.0
    if sigma <= 0.0:
        return 1.0 if lo < mean < hi else 0.0
    wide = sigma * math.sqrt(variance_scale)
    narrow_mass = _std_cdf((hi - mean) / sigma) - _std_cdf((lo - mean) / sigma)
    wide_mass = _std_cdf((hi - mean) / wide) - _std_cdf((lo - mean) / wide)
    return 0.5 * (narrow_mass + wide_mass)


def mixture_mass_array(
    means: np.ndarray,
    sigmas: np.ndarray,
    variance_scale: float,
    lo: np.ndarray,
    hi: np.ndarray,
) -> np.ndarray:
    """Vectorised mixture_mass for broadcastable arrays of points and bounds.

    Requires strictly positive sigmas; the simulation guarantees that
    through the variance floor.
    """
    wide = sigmas * math.sqrt(variance_scale)
    a = (lo - means) / sigmas
    b = (hi - means) / sigmas
    narrow = 0.5 * (_erf_vec(b / _SQRT2) - _erf_vec(a / _SQRT2))
    aw = (lo - means) / wide
    bw = (hi - means) / wide
    widem = 0.5 * (_erf_vec(bw / _SQRT2) - _erf_vec(aw / _SQRT2))
    mass = 0.5 * (narrow + widem)
    return np.where(hi > lo, mass, 0.0)
