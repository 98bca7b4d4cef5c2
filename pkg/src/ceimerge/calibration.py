"""Grid-search calibration of driver risk thresholds.

A single modelled driver is probed on a grid of (lower, upper) base
thresholds: one noise-free trial per cell against a constant-velocity
opponent, recording the driver's deviation from the initial velocity a
fixed time after the tunnel exit.  Recorded trials are then matched to
the nearest grid response, and two pooled linear regressions with
per-participant intercepts turn the matched values into participant
base thresholds plus shared incentive slopes.

Grids are expensive to build, so they are cached on disk keyed by a
hash of the package sources and every input that shapes the response.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .engine import PairParams, TrialLog, code_version, derive_seed, run_trial
from .params import ModelConstants
from .risk import RiskThresholds
from .scenario import Condition, Track


class CalibrationError(RuntimeError):
    """The calibration inputs cannot identify the requested parameters."""


@dataclass(frozen=True)
class GridSpec:
    """Threshold grid layout and probe timing."""

    lower_min: float = 0.01
    lower_max: float = 0.4
    lower_count: int = 25
    upper_min: float = 0.3
    upper_max: float = 0.9
    upper_count: int = 25
    probe_time: float = 1.0  # seconds after the tunnel exit

    def lower_values(self) -> np.ndarray:
        return np.linspace(self.lower_min, self.lower_max, self.lower_count)

    def upper_values(self) -> np.ndarray:
        return np.linspace(self.upper_min, self.upper_max, self.upper_count)

    @property
    def lower_cell(self) -> float:
        return (self.lower_max - self.lower_min) / (self.lower_count - 1)

    @property
    def upper_cell(self) -> float:
        return (self.upper_max - self.upper_min) / (self.upper_count - 1)


@dataclass
class GridResponse:
    """Deviation responses on one condition's threshold grid.

    deviation[i, j] is the response at upper_values[i], lower_values[j].
    """

    condition_label: str
    lower_values: np.ndarray
    upper_values: np.ndarray
    deviation: np.ndarray


def probe_deviation(
    condition: Condition | str,
    theta_l: float,
    theta_u: float,
    spec: GridSpec = GridSpec(),
    constants: ModelConstants | None = None,
    track: Track | None = None,
    side: str = "left",
) -> float:
    """Deviation of one noise-free driver against a constant opponent.

    The probed driver runs with bare thresholds (no incentive slopes) and
    all noise disabled; the trial stops probe_time seconds after the
    tunnel exit and the deviation is read exactly there.
    """
    thresholds = RiskThresholds(theta_l, theta_u)
    pair = PairParams("probe", thresholds, thresholds)
    if side == "left":
        opponent = "constant"
    elif side == "right":
        opponent = "constant_left"
    else:
        raise ValueError(f"unknown side {side!r}")
    log = run_trial(
        condition,
        pair,
        mode="deterministic",
        constants=constants,
        track=track,
        opponent=opponent,
        stop_after_exit=spec.probe_time,
    )
    if log.tunnel_exit_time is None:
        raise CalibrationError("probe trial never left the tunnel")
    s = log.left if side == "left" else log.right
    v = float(np.interp(log.tunnel_exit_time + spec.probe_time, log.t, s.velocity))
    return v - s.initial_velocity


def build_grid(
    condition: Condition | str,
    spec: GridSpec = GridSpec(),
    constants: ModelConstants | None = None,
    track: Track | None = None,
) -> GridResponse:
    """Probe every grid cell for one condition (left driver, no noise)."""
    if isinstance(condition, str):
        condition = Condition.from_label(condition)
    lows = spec.lower_values()
    ups = spec.upper_values()
    deviation = np.empty((len(ups), len(lows)))
    for i, theta_u in enumerate(ups):
        for j, theta_l in enumerate(lows):
            deviation[i, j] = probe_deviation(
                condition, float(theta_l), float(theta_u), spec, constants, track
            )
    return GridResponse(condition.label, lows, ups, deviation)


def cache_dir() -> Path:
    env = os.environ.get("CEIMERGE_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "ceimerge"


def _grid_key(condition_label: str, spec: GridSpec, cst: ModelConstants, track: Track) -> str:
    payload = {
        "code": code_version(),
        "condition": condition_label,
        "spec": [getattr(spec, f.name) for f in fields(spec)],
        "constants": {f.name: getattr(cst, f.name) for f in fields(cst) if f.init},
        "track": [getattr(track, f.name) for f in fields(track)],
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:20]


def load_or_build_grid(
    condition: Condition | str,
    spec: GridSpec = GridSpec(),
    constants: ModelConstants | None = None,
    track: Track | None = None,
    cache: bool = True,
) -> GridResponse:
    """Return a condition's grid, from the on-disk cache when possible.

    Cache entries are invalidated by construction whenever the package
    sources, the grid spec, the model constants or the track change,
    because all of them are part of the cache key.
    """
    if isinstance(condition, str):
        condition = Condition.from_label(condition)
    cst = constants if constants is not None else ModelConstants()
    trk = track if track is not None else Track()
    path = cache_dir() / f"grid_{condition.label}_{_grid_key(condition.label, spec, cst, trk)}.npz"
    if cache and path.exists():
        data = np.load(path)
        return GridResponse(
            condition.label,
            data["lower_values"],
            data["upper_values"],
            data["deviation"],
        )
    grid = build_grid(condition, spec, cst, trk)
    if cache:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(
            path,
            lower_values=grid.lower_values,
            upper_values=grid.upper_values,
            deviation=grid.deviation,
        )
    return grid


@dataclass
class MatchResult:
    theta_l: float
    theta_u: float
    residual: float
    upper_index: int
    lower_index: int


def match_trial(grid: GridResponse, deviation: float) -> MatchResult:
    """Grid cell whose response is nearest to an observed deviation.

    Exact ties (plateaus produce bitwise-equal responses) resolve to the
    largest upper threshold, then the largest lower threshold.
    """
    diff = np.abs(grid.deviation - deviation)
    best = float(diff.min())
    rows, cols = np.nonzero(diff == best)
    i = int(rows.max())
    j = int(cols[rows == i].max())
    return MatchResult(
        theta_l=float(grid.lower_values[j]),
        theta_u=float(grid.upper_values[i]),
        residual=best,
        upper_index=i,
        lower_index=j,
    )


def observed_deviation(log: TrialLog, side: str, probe_time: float) -> float:
    """Deviation from the initial velocity probe_time seconds after the exit.

    Reads the logged velocity by linear interpolation; logs that end
    early (e.g. collisions) are clamped to their final sample.
    """
    if log.tunnel_exit_time is None:
        raise CalibrationError(
            f"trial {log.pair}/{log.condition.label}: no tunnel exit, cannot probe"
        )
    s = log.left if side == "left" else log.right
    v = float(np.interp(log.tunnel_exit_time + probe_time, log.t, s.velocity))
    return v - s.initial_velocity


def synthesize_probe_trials(
    pairs: Sequence[PairParams],
    conditions: Sequence[Condition | str],
    repetitions: int = 3,
    base_seed: int = 0,
    spec: GridSpec = GridSpec(),
    constants: ModelConstants | None = None,
    track: Track | None = None,
    sides: Sequence[str] = ("left", "right"),
) -> list[TrialLog]:
    """Noisy single-driver observations generated by the model itself.

    For every pair, side, condition and repetition this runs one
    stochastic trial of that driver (with its full thresholds, incentive
    slopes included) against a constant-velocity opponent, truncated at
    the probe time.  The scripted side is marked in the logs, so the
    matcher only sees the modelled driver.  Used to validate the
    calibration pipeline end to end against known parameters.
    """
    out: list[TrialLog] = []
    opponent_for = {"left": "constant", "right": "constant_left"}
    for pair in pairs:
        for side in sides:
            opponent = opponent_for[side]
            for cond in conditions:
                label = cond if isinstance(cond, str) else cond.label
                for rep in range(repetitions):
                    seed = derive_seed(base_seed, f"{pair.label}_{side}", label, rep)
                    out.append(
                        run_trial(
                            cond,
                            pair,
                            seed=seed,
                            mode="stochastic",
                            constants=constants,
                            track=track,
                            repetition=rep,
                            opponent=opponent,
                            stop_after_exit=spec.probe_time,
                        )
                    )
    return out


def match_dataset(
    logs: Iterable[TrialLog],
    spec: GridSpec = GridSpec(),
    constants: ModelConstants | None = None,
    track: Track | None = None,
    cache: bool = True,
) -> pd.DataFrame:
    """Match every (trial, driver) observation to grid thresholds.

    Right-side drivers are matched on the mirrored condition's grid; by
    the mirror symmetry of the scenario that grid is exactly their own
    response surface.  Sides that were driven by a scripted vehicle carry
    no threshold information and are skipped.  Returns one row per
    observation with participant id, covariates from the driver's view,
    the observed deviation, the matched thresholds and the match residual.
    """
    grids: dict[str, GridResponse] = {}
    rows = []
    for log in logs:
        for side in ("left", "right"):
            if side in log.scripted:
                continue
            cond = log.condition if side == "left" else log.condition.mirrored()
            grid = grids.get(cond.label)
            if grid is None:
                grid = load_or_build_grid(cond, spec, constants, track, cache)
                grids[cond.label] = grid
            deviation = observed_deviation(log, side, spec.probe_time)
            m = match_trial(grid, deviation)
            dp, dv = log.condition.covariates(side)
            rows.append(
                {
                    "participant": f"{log.pair}_{side}",
                    "pair": log.pair,
                    "side": side,
                    "condition": log.condition.label,
                    "repetition": log.repetition,
                    "dp": dp,
                    "dv": dv,
                    "deviation": deviation,
                    "theta_l": m.theta_l,
                    "theta_u": m.theta_u,
                    "residual": m.residual,
                }
            )
    return pd.DataFrame(rows)


@dataclass
class ThresholdFit:
    """Pooled regression result for one threshold kind."""

    participants: list[str]
    intercepts: np.ndarray
    intercept_se: np.ndarray
    slopes: np.ndarray  # (dp, dv, dp * dv)
    slope_se: np.ndarray
    residual_std: float


def fit_threshold_regression(table: pd.DataFrame, column: str) -> ThresholdFit:
    """Least squares of column ~ participant intercepts + dp + dv + dp:dv.

    Every participant gets its own intercept (a dummy column); the three
    covariate slopes are pooled across participants.  Standard errors
    come from the usual ordinary-least-squares covariance.
    """
    participants = sorted(table["participant"].unique())
    index = {p: k for k, p in enumerate(participants)}
    n = len(table)
    m = len(participants)
    X = np.zeros((n, m + 3))
    X[np.arange(n), table["participant"].map(index).to_numpy()] = 1.0
    dp = table["dp"].to_numpy(dtype=float)
    dv = table["dv"].to_numpy(dtype=float)
    X[:, m] = dp
    X[:, m + 1] = dv
    X[:, m + 2] = dp * dv
    y = table[column].to_numpy(dtype=float)
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise CalibrationError(
            f"design matrix for {column} is rank deficient ({rank} < {X.shape[1]}); "
            "the trials do not span enough distinct conditions"
        )
    dof = n - X.shape[1]
    if dof <= 0:
        raise CalibrationError(f"not enough observations to fit {column}")
    resid = y - X @ beta
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(np.diag(cov))
    return ThresholdFit(
        participants=participants,
        intercepts=beta[:m],
        intercept_se=se[:m],
        slopes=beta[m:],
        slope_se=se[m:],
        residual_std=math.sqrt(sigma2),
    )


@dataclass
class CalibrationResult:
    pairs: list[PairParams]
    lower_fit: ThresholdFit
    upper_fit: ThresholdFit
    matches: pd.DataFrame


def calibrate(
    logs: Sequence[TrialLog],
    spec: GridSpec = GridSpec(),
    constants: ModelConstants | None = None,
    track: Track | None = None,
    cache: bool = True,
) -> CalibrationResult:
    """Full pipeline: grids, per-trial matching, pooled regressions.

    The fitted slopes become the shared incentive parameters and the
    per-participant intercepts become the base thresholds of the
    returned pairs.
    """
    matches = match_dataset(logs, spec, constants, track, cache)
    if matches.empty:
        raise CalibrationError("no observations to calibrate on")
    lower = fit_threshold_regression(matches, "theta_l")
    upper = fit_threshold_regression(matches, "theta_u")
    lambda_l = tuple(float(x) for x in lower.slopes)
    lambda_u = tuple(float(x) for x in upper.slopes)
    lower_by = dict(zip(lower.participants, lower.intercepts))
    upper_by = dict(zip(upper.participants, upper.intercepts))

    pair_labels = sorted({row.pair for row in matches.itertuples()}, key=lambda s: (len(s), s))
    pairs = []
    for label in pair_labels:
        sides: dict[str, RiskThresholds] = {}
        for side in ("left", "right"):
            key = f"{label}_{side}"
            if key not in lower_by:
                continue
            sides[side] = RiskThresholds(
                theta_l=float(lower_by[key]),
                theta_u=float(upper_by[key]),
                lambda_l=lambda_l,
                lambda_u=lambda_u,
            )
        if not sides:
            raise CalibrationError(f"pair {label} has no observations")
        # a side that was never observed inherits its partner's fit
        left = sides.get("left") or sides["right"]
        right = sides.get("right") or sides["left"]
        pairs.append(PairParams(label, left, right))
    return CalibrationResult(pairs=pairs, lower_fit=lower, upper_fit=upper, matches=matches)
