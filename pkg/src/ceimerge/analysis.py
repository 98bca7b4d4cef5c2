"""Metrics, aggregate tables and figure exports for batches of trials.

Per-trial metrics are computed from the logged step series alone, so the
same code handles simulated trials and ingested human recordings.  All
aggregations exclude collision trials; collisions get their own count
table.  Deviations are measured against each driver's initial velocity
and only from the tunnel exit onward, the phase in which the drivers are
actually in control.
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
import yaml

from .engine import SideLog, TrialLog
from .scenario import Condition, Track

_EPS = 1e-12


def _exit_index(log: TrialLog) -> int:
    if log.tunnel_exit_time is None:
        return 0
    return int(np.searchsorted(log.t, log.tunnel_exit_time - 1e-9))


def _side(log: TrialLog, side: str) -> SideLog:
    if side == "left":
        return log.left
    if side == "right":
        return log.right
    raise ValueError(f"unknown side {side!r}")


def velocity_deviation_metrics(log: TrialLog, side: str) -> tuple[float, float, float]:
    """(max |deviation|, most positive, most negative) from the tunnel exit on."""
    s = _side(log, side)
    dev = s.velocity[_exit_index(log):] - s.initial_velocity
    if dev.size == 0:
        return math.nan, math.nan, math.nan
    return float(np.max(np.abs(dev))), float(np.max(dev)), float(np.min(dev))


def first_crossing(log: TrialLog, side: str, position: float | None = None) -> float | None:
    """Linearly interpolated time at which a front passes a position.

    Defaults to the merge point.  None when the front never gets there.
    """
    pos = log.track.merge_point if position is None else position
    f = _side(log, side).front
    if f[0] >= pos:
        return float(log.t[0])
    ahead = np.flatnonzero(f >= pos)
    if ahead.size == 0:
        return None
    i = int(ahead[0])
    f0, f1 = f[i - 1], f[i]
    if f1 == f0:
        return float(log.t[i])
    w = (pos - f0) / (f1 - f0)
    return float(log.t[i - 1] + w * (log.t[i] - log.t[i - 1]))


def merge_order(log: TrialLog) -> str:
    """Which front passes the merge point first: left, right, tie or none."""
    tl = first_crossing(log, "left")
    tr = first_crossing(log, "right")
    if tl is None and tr is None:
        return "none"
    if tr is None:
        return "left"
    if tl is None:
        return "right"
    if tl < tr:
        return "left"
    if tr < tl:
        return "right"
    return "tie"


def gap_at_merge(
    log: TrialLog, definition: str = "clearance", reference: str = "follower"
) -> float | None:
    """Distance between the vehicles when the merge happens.

    reference "follower" measures at the instant the second front reaches
    the merge point, when the merge is actually complete: the gap is how
    far the leader front has moved past the point.  reference "leader"
    measures at the first front's crossing instead: merge_point minus the
    follower front.  Both interpolate the crossing time linearly.
    "clearance" subtracts one vehicle length (leader rear bumper to
    follower front); "front_to_front" keeps the raw front distance.
    None when the trial has no such crossing or the order is a dead tie.
    """
    if definition not in ("clearance", "front_to_front"):
        raise ValueError(f"unknown gap definition {definition!r}")
    if reference not in ("follower", "leader"):
        raise ValueError(f"unknown gap reference {reference!r}")
    order = merge_order(log)
    if order not in ("left", "right"):
        return None
    leader = _side(log, order)
    follower = _side(log, "right" if order == "left" else "left")
    if reference == "follower":
        tc = first_crossing(log, "right" if order == "left" else "left")
        if tc is None:
            return None
        leader_front = float(np.interp(tc, log.t, leader.front))
        gap = leader_front - log.track.merge_point
    else:
        tc = first_crossing(log, order)
        if tc is None:
            return None
        follower_front = float(np.interp(tc, log.t, follower.front))
        gap = log.track.merge_point - follower_front
    if definition == "clearance":
        gap -= log.track.vehicle_length
    return gap


def conflict_resolution_time(log: TrialLog) -> float | None:
    """Seconds after the tunnel exit until the projected order last flips.

    At every step while both vehicles still approach the merge point, the
    naive arrival times (remaining distance over current velocity) decide
    who is projected to arrive first.  The conflict counts as resolved at
    the last change of that projection; 0.0 when it never changes.  None
    when the log has no tunnel exit.
    """
    if log.tunnel_exit_time is None:
        return None
    m_p = log.track.merge_point
    fl, fr = log.left.front, log.right.front
    vl, vr = log.left.velocity, log.right.velocity
    last_flip = None
    prev_sign = 0
    for i in range(_exit_index(log), len(log.t)):
        if fl[i] >= m_p or fr[i] >= m_p:
            break
        ta_l = (m_p - fl[i]) / vl[i] if vl[i] > _EPS else math.inf
        ta_r = (m_p - fr[i]) / vr[i] if vr[i] > _EPS else math.inf
        d = ta_l - ta_r
        if math.isnan(d):
            continue
        sign = 0 if d == 0.0 else (1 if d > 0.0 else -1)
        if prev_sign != 0 and sign != 0 and sign != prev_sign:
            last_flip = float(log.t[i])
        if sign != 0:
            prev_sign = sign
    if last_flip is None:
        return 0.0
    return last_flip - log.tunnel_exit_time


@dataclass
class TrialMetrics:
    """Scalar summary of one trial."""

    condition: str
    headway: float
    relative_velocity: float
    pair: str
    repetition: int
    seed: int | None
    mode: str
    source: str
    outcome: str
    merge_order: str
    gap: float | None
    crt: float | None
    left_max_abs_dev: float
    left_max_dev: float
    left_min_dev: float
    right_max_abs_dev: float
    right_max_dev: float
    right_min_dev: float


def trial_metrics(
    log: TrialLog,
    gap_definition: str = "clearance",
    gap_reference: str = "follower",
) -> TrialMetrics:
    l_abs, l_max, l_min = velocity_deviation_metrics(log, "left")
    r_abs, r_max, r_min = velocity_deviation_metrics(log, "right")
    return TrialMetrics(
        condition=log.condition.label,
        headway=log.condition.projected_headway,
        relative_velocity=log.condition.relative_velocity,
        pair=log.pair,
        repetition=log.repetition,
        seed=log.seed,
        mode=log.mode,
        source=log.source,
        outcome=log.outcome,
        merge_order=merge_order(log),
        gap=gap_at_merge(log, gap_definition, gap_reference),
        crt=conflict_resolution_time(log),
        left_max_abs_dev=l_abs,
        left_max_dev=l_max,
        left_min_dev=l_min,
        right_max_abs_dev=r_abs,
        right_max_dev=r_max,
        right_min_dev=r_min,
    )


def metrics_frame(
    logs: Iterable[TrialLog],
    gap_definition: str = "clearance",
    gap_reference: str = "follower",
) -> pd.DataFrame:
    """One row of scalar metrics per trial."""
    rows = [asdict(trial_metrics(log, gap_definition, gap_reference)) for log in logs]
    return pd.DataFrame(rows)


def completed_only(df: pd.DataFrame) -> pd.DataFrame:
    return df[df["outcome"] == "completed"]


_METRIC_COLUMNS = [
    "merge_order",
    "gap",
    "crt",
    "left_max_abs_dev",
    "left_max_dev",
    "left_min_dev",
    "right_max_abs_dev",
    "right_max_dev",
    "right_min_dev",
]


def long_format(df: pd.DataFrame) -> pd.DataFrame:
    """Melt the per-trial frame to one row per trial per metric."""
    id_vars = [c for c in df.columns if c not in _METRIC_COLUMNS]
    out = df.melt(
        id_vars=id_vars,
        value_vars=[c for c in _METRIC_COLUMNS if c in df.columns],
        var_name="metric",
        value_name="value",
    )
    return out.sort_values(
        ["condition", "pair", "repetition", "metric"], kind="stable"
    ).reset_index(drop=True)


def collision_table(df: pd.DataFrame) -> pd.DataFrame:
    """Collision counts and rates per condition, plus a total row."""
    g = df.groupby("condition", sort=False)["outcome"]
    out = g.agg(
        trials="size", collisions=lambda s: int((s == "collision").sum())
    ).reset_index()
    total = pd.DataFrame(
        {
            "condition": ["all"],
            "trials": [len(df)],
            "collisions": [int((df["outcome"] == "collision").sum())],
        }
    )
    out = pd.concat([out, total], ignore_index=True)
    out["rate"] = out["collisions"] / out["trials"]
    return out


def deviation_by_pair(df: pd.DataFrame) -> pd.DataFrame:
    """Mean absolute maximum velocity deviation per pair, driver and condition."""
    d = completed_only(df)
    frames = []
    for side in ("left", "right"):
        g = d.groupby(["pair", "condition"], sort=False)[f"{side}_max_abs_dev"]
        sub = g.agg(mean_abs_max_dev="mean", n="size").reset_index()
        sub.insert(1, "driver", side)
        frames.append(sub)
    out = pd.concat(frames, ignore_index=True)
    return out.sort_values(["pair", "driver", "condition"], kind="stable").reset_index(
        drop=True
    )


def decisions_by_pair(df: pd.DataFrame) -> pd.DataFrame:
    """Mean signed extreme deviations (go and yield side) per pair and driver."""
    d = completed_only(df)
    frames = []
    for side in ("left", "right"):
        g = d.groupby(["pair", "condition"], sort=False)
        sub = g.agg(
            mean_max_dev=(f"{side}_max_dev", "mean"),
            mean_min_dev=(f"{side}_min_dev", "mean"),
            n=(f"{side}_max_dev", "size"),
        ).reset_index()
        sub.insert(1, "driver", side)
        frames.append(sub)
    out = pd.concat(frames, ignore_index=True)
    return out.sort_values(["pair", "driver", "condition"], kind="stable").reset_index(
        drop=True
    )


def deviation_by_covariates(df: pd.DataFrame) -> pd.DataFrame:
    """Deviation statistics per kinematic cell, seen from each driver's side.

    Every trial contributes two observations: the left driver at the
    condition's covariates and the right driver at the mirrored ones.
    """
    d = completed_only(df)
    parts = []
    for side, sgn in (("left", 1.0), ("right", -1.0)):
        parts.append(
            pd.DataFrame(
                {
                    "headway": sgn * d["headway"].to_numpy(),
                    "relative_velocity": sgn * d["relative_velocity"].to_numpy(),
                    "dev": d[f"{side}_max_abs_dev"].to_numpy(),
                }
            )
        )
    long = pd.concat(parts, ignore_index=True)
    g = long.groupby(["headway", "relative_velocity"])["dev"]
    out = g.agg(
        mean_abs_max_dev="mean",
        q25=lambda s: s.quantile(0.25),
        q75=lambda s: s.quantile(0.75),
        n="size",
    ).reset_index()
    return out


def gap_by_pair(df: pd.DataFrame) -> pd.DataFrame:
    d = completed_only(df)
    g = d.groupby(["pair", "condition"], sort=False)["gap"]
    return g.agg(mean_gap="mean", n="size").reset_index()


def gap_by_condition(df: pd.DataFrame) -> pd.DataFrame:
    d = completed_only(df)
    g = d.groupby(["condition", "headway", "relative_velocity"], sort=False)["gap"]
    out = g.agg(
        mean_gap="mean",
        q25=lambda s: s.quantile(0.25),
        q75=lambda s: s.quantile(0.75),
        n="size",
    ).reset_index()
    return out.sort_values(["headway", "relative_velocity"]).reset_index(drop=True)


def _wilson(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    # 95 % score interval for a binomial proportion
    if n == 0:
        return math.nan, math.nan
    p = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    return center - half, center + half


def merge_order_by_condition(df: pd.DataFrame) -> pd.DataFrame:
    """Probability that the left driver merges first, per condition."""
    d = completed_only(df)
    d = d[d["merge_order"].isin(["left", "right"])]
    rows = []
    for (label, h, dv), sub in d.groupby(
        ["condition", "headway", "relative_velocity"], sort=False
    ):
        k = int((sub["merge_order"] == "left").sum())
        n = len(sub)
        lo, hi = _wilson(k, n)
        rows.append(
            {
                "condition": label,
                "headway": h,
                "relative_velocity": dv,
                "p_left_first": k / n,
                "ci_low": lo,
                "ci_high": hi,
                "n": n,
            }
        )
    out = pd.DataFrame(rows)
    return out.sort_values(["headway", "relative_velocity"]).reset_index(drop=True)


def crt_by_condition(df: pd.DataFrame) -> pd.DataFrame:
    d = completed_only(df)
    d = d[d["crt"].notna()]
    g = d.groupby(["condition", "headway", "relative_velocity"], sort=False)["crt"]
    out = g.agg(
        mean_crt="mean",
        q25=lambda s: s.quantile(0.25),
        q75=lambda s: s.quantile(0.75),
        n="size",
    ).reset_index()
    return out.sort_values(["headway", "relative_velocity"]).reset_index(drop=True)


def compare_sources(df_a: pd.DataFrame, df_b: pd.DataFrame, metric: str = "deviation") -> pd.DataFrame:
    """Paired per-pair/condition means of two datasets (e.g. model vs human).

    metric "deviation" pairs mean absolute maximum deviations per driver,
    "gap" pairs mean gaps per pair.  Rows present in only one dataset are
    dropped.
    """
    if metric == "deviation":
        a = deviation_by_pair(df_a)
        b = deviation_by_pair(df_b)
        keys = ["pair", "driver", "condition"]
        value = "mean_abs_max_dev"
    elif metric == "gap":
        a = gap_by_pair(df_a)
        b = gap_by_pair(df_b)
        keys = ["pair", "condition"]
        value = "mean_gap"
    else:
        raise ValueError(f"unknown comparison metric {metric!r}")
    merged = a.merge(b, on=keys, suffixes=("_a", "_b"))
    out = merged[keys].copy()
    out["value_a"] = merged[f"{value}_a"]
    out["value_b"] = merged[f"{value}_b"]
    return out


_TABLE_BUILDERS = {
    "collisions": collision_table,
    "deviation_by_pair": deviation_by_pair,
    "deviation_by_covariates": deviation_by_covariates,
    "decisions_by_pair": decisions_by_pair,
    "gap_by_pair": gap_by_pair,
    "gap_by_condition": gap_by_condition,
    "merge_order_by_condition": merge_order_by_condition,
    "crt_by_condition": crt_by_condition,
}


def write_table(df: pd.DataFrame, name: str, path: str | Path) -> None:
    """Write an aggregate table as CSV behind a one-line schema comment."""
    with open(path, "w") as f:
        f.write(f"# schema: ceimerge-table {name} v1\n")
        df.to_csv(f, index=False)


def export_tables(
    df: pd.DataFrame, out_dir: str | Path, human: pd.DataFrame | None = None
) -> dict[str, Path]:
    """Write all aggregate tables to out_dir; returns name -> path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    for name, build in _TABLE_BUILDERS.items():
        path = out_dir / f"{name}.csv"
        write_table(build(df), name, path)
        written[name] = path
    if human is not None:
        for metric in ("deviation", "gap"):
            name = f"model_vs_human_{metric}"
            path = out_dir / f"{name}.csv"
            write_table(compare_sources(df, human, metric), name, path)
            written[name] = path
    return written


def _condition_axis(table: pd.DataFrame):
    order = table.sort_values(["headway", "relative_velocity"])
    return np.arange(len(order)), order


def render_figures(
    df: pd.DataFrame, out_dir: str | Path, human: pd.DataFrame | None = None
) -> list[Path]:
    """Render overview figures as SVG files; returns the written paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    sources = [("model", df)] + ([("human", human)] if human is not None else [])

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, frame in sources:
        table = deviation_by_covariates(frame)
        for dv, sub in table.groupby("relative_velocity"):
            sub = sub.sort_values("headway")
            ax.errorbar(
                sub["headway"],
                sub["mean_abs_max_dev"],
                yerr=[
                    sub["mean_abs_max_dev"] - sub["q25"],
                    sub["q75"] - sub["mean_abs_max_dev"],
                ],
                marker="o",
                capsize=3,
                label=f"{name}, dv={dv:g}",
            )
    ax.set_xlabel("projected headway from the driver's view [m]")
    ax.set_ylabel("mean abs max deviation [m/s]")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "deviations.svg"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, frame in sources:
        table = gap_by_condition(frame)
        x, order = _condition_axis(table)
        ax.errorbar(
            x,
            order["mean_gap"],
            yerr=[order["mean_gap"] - order["q25"], order["q75"] - order["mean_gap"]],
            marker="o",
            capsize=3,
            label=name,
        )
        ax.set_xticks(x, order["condition"], rotation=45)
    ax.set_xlabel("condition")
    ax.set_ylabel("mean gap at merge [m]")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "gaps.svg"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, frame in sources:
        table = merge_order_by_condition(frame)
        x, order = _condition_axis(table)
        ax.errorbar(
            x,
            order["p_left_first"],
            yerr=[
                order["p_left_first"] - order["ci_low"],
                order["ci_high"] - order["p_left_first"],
            ],
            marker="o",
            capsize=3,
            label=name,
        )
        ax.set_xticks(x, order["condition"], rotation=45)
    ax.axhline(0.5, color="gray", lw=0.5)
    ax.set_xlabel("condition")
    ax.set_ylabel("P(left merges first)")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "merge_order.svg"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, frame in sources:
        table = crt_by_condition(frame)
        x, order = _condition_axis(table)
        ax.errorbar(
            x,
            order["mean_crt"],
            yerr=[order["mean_crt"] - order["q25"], order["q75"] - order["mean_crt"]],
            marker="o",
            capsize=3,
            label=name,
        )
        ax.set_xticks(x, order["condition"], rotation=45)
    ax.set_xlabel("condition")
    ax.set_ylabel("conflict resolution time [s]")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "crt.svg"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)
    return written


# ---------------------------------------------------------------------------
# ingest of externally recorded trials

_REQUIRED_CHANNELS = ("time", "left_front", "left_velocity", "right_front", "right_velocity")

_TIME_FACTORS = {"s": 1.0, "ms": 1e-3}
_POSITION_FACTORS = {"m": 1.0, "cm": 1e-2, "mm": 1e-3}
_VELOCITY_FACTORS = {"m/s": 1.0, "km/h": 1.0 / 3.6}


@dataclass
class Rejection:
    """Why one input file was not ingested."""

    file: str
    reason: str
    detail: str


@dataclass
class IngestSchema:
    """How to read a directory of recorded trials.

    filename_pattern must expose named groups 'pair', 'condition' and
    optionally 'repetition'.  columns maps the required channel names to
    the column names used in the files.
    """

    filename_pattern: re.Pattern
    columns: dict[str, str]
    time_unit: str = "s"
    position_unit: str = "m"
    velocity_unit: str = "m/s"
    track: Track = Track()


def default_ingest_schema() -> IngestSchema:
    return IngestSchema(
        filename_pattern=re.compile(
            r"pair(?P<pair>\d+)_(?P<condition>-?\d+_-?\d+)_rep(?P<repetition>\d+)\.csv"
        ),
        columns={
            "time": "t",
            "left_front": "left_front",
            "left_velocity": "left_velocity",
            "right_front": "right_front",
            "right_velocity": "right_velocity",
        },
    )


def load_ingest_schema(path: str | Path) -> IngestSchema:
    """Read an ingest schema from YAML; missing keys keep their defaults."""
    data = yaml.safe_load(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError(f"{path}: schema must be a mapping")
    base = default_ingest_schema()
    pattern = base.filename_pattern
    if "filename_pattern" in data:
        pattern = re.compile(str(data["filename_pattern"]))
    columns = dict(base.columns)
    for key, value in (data.get("columns") or {}).items():
        if key not in _REQUIRED_CHANNELS:
            raise ValueError(f"{path}: unknown channel {key!r} in columns")
        columns[key] = str(value)
    units = data.get("units") or {}
    track_node = data.get("track") or {}
    track = Track(
        tunnel_length=float(track_node.get("tunnel_length", base.track.tunnel_length)),
        approach_length=float(track_node.get("approach_length", base.track.approach_length)),
        follow_length=float(track_node.get("follow_length", base.track.follow_length)),
        vehicle_length=float(track_node.get("vehicle_length", base.track.vehicle_length)),
        vehicle_width=float(track_node.get("vehicle_width", base.track.vehicle_width)),
    )
    return IngestSchema(
        filename_pattern=pattern,
        columns=columns,
        time_unit=str(units.get("time", base.time_unit)),
        position_unit=str(units.get("position", base.position_unit)),
        velocity_unit=str(units.get("velocity", base.velocity_unit)),
        track=track,
    )


def _ingest_one(path: Path, schema: IngestSchema) -> TrialLog | Rejection:
    m = schema.filename_pattern.fullmatch(path.name)
    if m is None:
        return Rejection(path.name, "unmatched_filename", "name does not match the schema pattern")
    groups = m.groupdict()
    try:
        condition = Condition.from_label(groups["condition"])
    except ValueError as exc:
        return Rejection(path.name, "unknown_condition", str(exc))
    try:
        frame = pd.read_csv(path, comment="#")
    except Exception as exc:
        return Rejection(path.name, "unreadable", str(exc))
    missing = [
        schema.columns[ch] for ch in _REQUIRED_CHANNELS if schema.columns[ch] not in frame.columns
    ]
    if missing:
        return Rejection(path.name, "missing_column", ", ".join(missing))

    t = frame[schema.columns["time"]].to_numpy(dtype=float) * _TIME_FACTORS[schema.time_unit]
    if len(t) < 2:
        return Rejection(path.name, "too_short", f"{len(t)} samples")
    steps = np.diff(t)
    if np.max(np.abs(steps - steps[0])) > 1e-6 * max(1.0, abs(steps[0])):
        return Rejection(path.name, "non_uniform_timestamps", "time steps vary")

    pos_f = _POSITION_FACTORS[schema.position_unit]
    vel_f = _VELOCITY_FACTORS[schema.velocity_unit]
    track = schema.track
    sides = {}
    for side in ("left", "right"):
        front = frame[schema.columns[f"{side}_front"]].to_numpy(dtype=float) * pos_f
        velocity = frame[schema.columns[f"{side}_velocity"]].to_numpy(dtype=float) * vel_f
        nan = np.full(len(t), math.nan)
        sides[side] = SideLog(
            initial_velocity=float(velocity[0]),
            front=front,
            velocity=velocity,
            net_accel=np.gradient(velocity, t),
            commanded=nan,
            executed=nan.copy(),
            perceived_other_velocity=nan.copy(),
            risk=nan.copy(),
            rho_lower=nan.copy(),
            rho_upper=nan.copy(),
            replan=[""] * len(t),
        )

    fl, fr = sides["left"].front, sides["right"].front
    past = np.minimum(fl, fr) > track.merge_point
    overlap = np.abs(fl - fr) < track.vehicle_length
    hits = np.flatnonzero(past & overlap)
    outcome = "collision" if hits.size else "completed"
    collision_time = float(t[hits[0]]) if hits.size else None
    both_out = np.flatnonzero(
        (fl >= track.tunnel_length) & (fr >= track.tunnel_length)
    )
    exit_time = float(t[both_out[0]]) if both_out.size else None

    return TrialLog(
        condition=condition,
        pair=str(groups["pair"]),
        repetition=int(groups.get("repetition") or 0),
        seed=None,
        mode="recorded",
        source="human",
        outcome=outcome,
        collision_time=collision_time,
        tunnel_exit_time=exit_time,
        track=track,
        t=t,
        left=sides["left"],
        right=sides["right"],
    )


def ingest_human_dataset(
    root: str | Path, schema: IngestSchema | None = None
) -> tuple[list[TrialLog], list[Rejection]]:
    """Read a directory of recorded trials.

    Returns the successfully ingested logs plus one Rejection per skipped
    file.  The scan order (and thus the output order) is sorted by name.
    """
    schema = schema or default_ingest_schema()
    bad_units = []
    if schema.time_unit not in _TIME_FACTORS:
        bad_units.append(f"time unit {schema.time_unit!r}")
    if schema.position_unit not in _POSITION_FACTORS:
        bad_units.append(f"position unit {schema.position_unit!r}")
    if schema.velocity_unit not in _VELOCITY_FACTORS:
        bad_units.append(f"velocity unit {schema.velocity_unit!r}")
    if bad_units:
        return [], [Rejection("<schema>", "unsupported_unit", ", ".join(bad_units))]
    logs: list[TrialLog] = []
    rejections: list[Rejection] = []
    for path in sorted(Path(root).glob("*.csv")):
        result = _ingest_one(path, schema)
        if isinstance(result, Rejection):
            rejections.append(result)
        else:
            logs.append(result)
    return logs, rejections
