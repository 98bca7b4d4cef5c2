"""Command line interface.

Subcommands:
  run        simulate a batch of trials and write per-trial CSV logs
  metrics    compute per-trial metrics from a directory of trial logs
  export     write aggregate tables and overview figures
  grid       build (or fetch from cache) one calibration grid
  calibrate  fit driver thresholds from a directory of recorded trials

Configuration comes from an optional YAML file plus a few overriding
flags.  Invalid configuration is reported per field and exits with
status 2; runtime failures exit with status 1.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analysis import (
    export_tables,
    ingest_human_dataset,
    load_ingest_schema,
    long_format,
    metrics_frame,
    render_figures,
    write_table,
)
from .calibration import (
    CalibrationError,
    GridSpec,
    calibrate,
    load_or_build_grid,
)
from .engine import (
    ParameterError,
    TrialFormatError,
    code_version,
    derive_seed,
    load_parameters,
    load_trial_log,
    run_batch,
    save_parameters,
    save_trial_log,
)
from .params import ModelConstants
from .scenario import ALL_CONDITIONS, DEFAULT_CONDITIONS, Condition, Track

_MODES = ("stochastic", "deterministic")
_GAP_DEFINITIONS = ("clearance", "front_to_front")
_GAP_REFERENCES = ("follower", "leader")


def _load_config(path: str | None, errors: list[str]) -> dict:
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError:
        errors.append(f"config: file not found: {path}")
        return {}
    except yaml.YAMLError as exc:
        errors.append(f"config: invalid YAML: {exc}")
        return {}
    if data is None:
        return {}
    if not isinstance(data, dict):
        errors.append("config: top level must be a mapping")
        return {}
    return data


_CONFIG_KEYS = {
    "pairs",
    "conditions",
    "repetitions",
    "seed",
    "mode",
    "workers",
    "gap_definition",
    "gap_reference",
    "params",
    "constants",
    "track",
    "grid",
}


def _check_unknown_keys(config: dict, errors: list[str]) -> None:
    for key in config:
        if key not in _CONFIG_KEYS:
            errors.append(f"config: unknown key {key!r}")


def _resolve_conditions(node, errors: list[str]) -> list[str]:
    if node is None or node == "default":
        return list(DEFAULT_CONDITIONS)
    if node == "all":
        return list(ALL_CONDITIONS)
    if isinstance(node, str):
        node = [node]
    if not isinstance(node, list) or not node:
        errors.append("conditions: must be a non-empty list, 'default' or 'all'")
        return []
    known = set(ALL_CONDITIONS)
    labels: list[str] = []
    for i, item in enumerate(node):
        label = str(item)
        try:
            normalized = Condition.from_label(label).label
        except ValueError:
            errors.append(f"conditions[{i}]: unknown condition {label!r}")
            continue
        if normalized not in known:
            errors.append(f"conditions[{i}]: unknown condition {label!r}")
            continue
        labels.append(normalized)
    return labels


def _resolve_dataclass(cls, node, name: str, errors: list[str]):
    if node is None:
        return cls()
    if not isinstance(node, dict):
        errors.append(f"{name}: must be a mapping")
        return cls()
    valid = {f.name for f in dataclasses.fields(cls) if f.init}
    kwargs = {}
    for key, value in node.items():
        if key not in valid:
            errors.append(f"{name}.{key}: unknown field")
            continue
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        errors.append(f"{name}: {exc}")
        return cls()


def _resolve_int(config: dict, key: str, default: int, minimum: int, errors: list[str]) -> int:
    raw = config.get(key, default)
    if isinstance(raw, bool) or not isinstance(raw, int):
        errors.append(f"{key}: must be an integer")
        return default
    if raw < minimum:
        errors.append(f"{key}: must be >= {minimum}")
        return default
    return raw


@dataclasses.dataclass
class RunSetup:
    pairs: list
    conditions: list[str]
    repetitions: int
    seed: int
    mode: str
    workers: int
    gap_definition: str
    gap_reference: str
    constants: ModelConstants
    track: Track
    config: dict


def _resolve_run(config: dict, args) -> tuple[RunSetup | None, list[str]]:
    errors: list[str] = []
    _check_unknown_keys(config, errors)

    conditions = _resolve_conditions(
        args.conditions.split(",") if args.conditions else config.get("conditions"),
        errors,
    )
    repetitions = _resolve_int(config, "repetitions", 10, 1, errors)
    if args.repetitions is not None:
        repetitions = args.repetitions
    seed = _resolve_int(config, "seed", 0, 0, errors)
    if args.seed is not None:
        seed = args.seed
    workers = _resolve_int(config, "workers", 1, 0, errors)
    if args.workers is not None:
        workers = args.workers
    mode = str(config.get("mode", "stochastic"))
    if args.mode is not None:
        mode = args.mode
    if mode not in _MODES:
        errors.append(f"mode: must be one of {', '.join(_MODES)}")
    gap_definition = str(config.get("gap_definition", "clearance"))
    if gap_definition not in _GAP_DEFINITIONS:
        errors.append(f"gap_definition: must be one of {', '.join(_GAP_DEFINITIONS)}")
    gap_reference = str(config.get("gap_reference", "follower"))
    if gap_reference not in _GAP_REFERENCES:
        errors.append(f"gap_reference: must be one of {', '.join(_GAP_REFERENCES)}")

    constants = _resolve_dataclass(ModelConstants, config.get("constants"), "constants", errors)
    track = _resolve_dataclass(Track, config.get("track"), "track", errors)

    params_path = args.params or config.get("params")
    try:
        available = load_parameters(params_path)
    except (ParameterError, FileNotFoundError) as exc:
        errors.append(f"params: {exc}")
        available = []
    by_label = {p.label: p for p in available}
    wanted = args.pairs.split(",") if args.pairs else config.get("pairs")
    if wanted is None or wanted == "all":
        pairs = available
    else:
        if isinstance(wanted, str):
            wanted = [wanted]
        if not isinstance(wanted, list) or not wanted:
            errors.append("pairs: must be a non-empty list or 'all'")
            wanted = []
        pairs = []
        for i, item in enumerate(wanted):
            label = str(item)
            if label not in by_label:
                errors.append(f"pairs[{i}]: unknown pair {label!r}")
                continue
            pairs.append(by_label[label])

    if errors:
        return None, errors
    return (
        RunSetup(
            pairs=pairs,
            conditions=conditions,
            repetitions=repetitions,
            seed=seed,
            mode=mode,
            workers=workers,
            gap_definition=gap_definition,
            gap_reference=gap_reference,
            constants=constants,
            track=track,
            config=config,
        ),
        [],
    )


def _trial_filename(log) -> str:
    return f"pair{log.pair}_{log.condition.label}_rep{log.repetition}.csv"


def cmd_run(args) -> int:
    errors: list[str] = []
    config = _load_config(args.config, errors)
    if errors:
        return _fail(errors)
    setup, errors = _resolve_run(config, args)
    if setup is None:
        return _fail(errors)

    out_dir = Path(args.out)
    trials_dir = out_dir / "trials"
    trials_dir.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()
    logs = run_batch(
        setup.pairs,
        conditions=setup.conditions,
        repetitions=setup.repetitions,
        base_seed=setup.seed,
        mode=setup.mode,
        constants=setup.constants,
        track=setup.track,
        workers=setup.workers,
    )
    elapsed = time.perf_counter() - started

    index = []
    for log in logs:
        name = _trial_filename(log)
        save_trial_log(log, trials_dir / name)
        index.append(
            {
                "file": f"trials/{name}",
                "pair": log.pair,
                "condition": log.condition.label,
                "repetition": log.repetition,
                "seed": log.seed,
                "outcome": log.outcome,
            }
        )
    manifest = {
        "schema": 1,
        "code_version": code_version(),
        "config": setup.config,
        "resolved": {
            "pairs": [p.label for p in setup.pairs],
            "conditions": setup.conditions,
            "repetitions": setup.repetitions,
            "seed": setup.seed,
            "mode": setup.mode,
            "workers": setup.workers,
            "gap_definition": setup.gap_definition,
            "gap_reference": setup.gap_reference,
            "constants": {
                f.name: getattr(setup.constants, f.name)
                for f in dataclasses.fields(setup.constants)
                if f.init
            },
            "track": dataclasses.asdict(setup.track),
        },
        "trials": index,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    outcomes = {}
    for entry in index:
        outcomes[entry["outcome"]] = outcomes.get(entry["outcome"], 0) + 1
    summary = ", ".join(f"{v} {k}" for k, v in sorted(outcomes.items()))
    print(f"ran {len(logs)} trials in {elapsed:.1f}s ({summary})")
    print(f"wrote {out_dir / 'manifest.json'}")
    return 0


def _load_trials(path: str, errors: list[str]):
    root = Path(path)
    if root.is_dir() and (root / "trials").is_dir():
        root = root / "trials"
    if not root.is_dir():
        errors.append(f"trials: not a directory: {path}")
        return []
    logs = []
    skipped = 0
    for f in sorted(root.glob("*.csv")):
        try:
            logs.append(load_trial_log(f))
        except (TrialFormatError, OSError) as exc:
            skipped += 1
            print(f"skipped {f.name}: {exc}", file=sys.stderr)
    if skipped:
        print(f"skipped {skipped} unreadable trial file(s)", file=sys.stderr)
    if not logs:
        errors.append(f"trials: no trial logs found under {root}")
    return logs


def cmd_metrics(args) -> int:
    errors: list[str] = []
    logs = _load_trials(args.trials, errors)
    if errors:
        return _fail(errors)
    df = metrics_frame(logs, gap_definition=args.gap_definition, gap_reference=args.gap_reference)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_table(df, "trial_metrics", out)
    long_out = out.with_name(out.stem + "_long" + (out.suffix or ".csv"))
    write_table(long_format(df), "trial_metrics_long", long_out)
    done = df[df["outcome"] == "completed"]
    headline = {
        "trials": int(len(df)),
        "completed": int(len(done)),
        "collisions": int((df["outcome"] == "collision").sum()),
        "mean_gap": None if done.empty else float(done["gap"].mean()),
        "mean_abs_max_dev": None
        if done.empty
        else float(
            np.concatenate([done["left_max_abs_dev"], done["right_max_abs_dev"]]).mean()
        ),
    }
    print(json.dumps(headline, indent=2))
    print(f"wrote {out}", file=sys.stderr)
    print(f"wrote {long_out}", file=sys.stderr)
    return 0


def cmd_export(args) -> int:
    errors: list[str] = []
    logs = _load_trials(args.trials, errors)
    if errors:
        return _fail(errors)
    df = metrics_frame(logs, gap_definition=args.gap_definition, gap_reference=args.gap_reference)
    human_df = None
    if args.human:
        schema = None
        if args.schema:
            try:
                schema = load_ingest_schema(args.schema)
            except (ValueError, FileNotFoundError) as exc:
                return _fail([f"schema: {exc}"])
        human_logs, rejections = ingest_human_dataset(args.human, schema)
        for r in rejections:
            print(f"skipped {r.file}: {r.reason} ({r.detail})", file=sys.stderr)
        if not human_logs:
            return _fail(["human: no usable trials ingested"])
        human_df = metrics_frame(human_logs, gap_definition=args.gap_definition, gap_reference=args.gap_reference)
    out_dir = Path(args.out)
    written = export_tables(df, out_dir, human=human_df)
    paths = list(written.values())
    if not args.no_figures:
        paths += render_figures(df, out_dir, human=human_df)
    for p in paths:
        print(f"wrote {p}")
    return 0


def _grid_spec_from_config(config: dict, errors: list[str]) -> GridSpec:
    return _resolve_dataclass(GridSpec, config.get("grid"), "grid", errors)


def cmd_grid(args) -> int:
    errors: list[str] = []
    config = _load_config(args.config, errors)
    _check_unknown_keys(config, errors)
    labels = _resolve_conditions([args.condition], errors)
    spec = _grid_spec_from_config(config, errors)
    constants = _resolve_dataclass(ModelConstants, config.get("constants"), "constants", errors)
    track = _resolve_dataclass(Track, config.get("track"), "track", errors)
    if errors:
        return _fail(errors)
    label = labels[0]
    started = time.perf_counter()
    grid = load_or_build_grid(label, spec, constants, track, cache=not args.no_cache)
    elapsed = time.perf_counter() - started
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(
            out,
            lower_values=grid.lower_values,
            upper_values=grid.upper_values,
            deviation=grid.deviation,
        )
        print(f"wrote {out}")
    dev = grid.deviation
    print(
        f"grid {label}: {dev.shape[0]}x{dev.shape[1]} cells, "
        f"deviation range [{dev.min():+.3f}, {dev.max():+.3f}] m/s "
        f"({elapsed:.1f}s)"
    )
    return 0


def cmd_calibrate(args) -> int:
    errors: list[str] = []
    config = _load_config(args.config, errors)
    _check_unknown_keys(config, errors)
    spec = _grid_spec_from_config(config, errors)
    constants = _resolve_dataclass(ModelConstants, config.get("constants"), "constants", errors)
    track = _resolve_dataclass(Track, config.get("track"), "track", errors)
    schema = None
    if args.schema:
        try:
            schema = load_ingest_schema(args.schema)
        except (ValueError, FileNotFoundError) as exc:
            errors.append(f"schema: {exc}")
    if errors:
        return _fail(errors)

    logs, rejections = ingest_human_dataset(args.data, schema)
    for r in rejections:
        print(f"skipped {r.file}: {r.reason} ({r.detail})", file=sys.stderr)
    if not logs:
        return _fail(["data: no usable trials ingested"])
    print(f"ingested {len(logs)} trials ({len(rejections)} rejected)", file=sys.stderr)

    try:
        result = calibrate(logs, spec, constants, track, cache=not args.no_cache)
    except CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_parameters(result.pairs, out)
    print(f"wrote {out}")
    if args.matches:
        write_table(result.matches, "calibration_matches", Path(args.matches))
        print(f"wrote {args.matches}")
    for name, fit in (("lower", result.lower_fit), ("upper", result.upper_fit)):
        slopes = ", ".join(
            f"{s:+.4f} (se {e:.4f})" for s, e in zip(fit.slopes, fit.slope_se)
        )
        print(f"{name} threshold slopes: {slopes}")
    return 0


def _fail(errors: list[str]) -> int:
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ceimerge",
        description="Two-vehicle merging simulator with risk-threshold drivers.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a batch of trials")
    p_run.add_argument("--config", help="YAML run configuration")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, help="override the base seed")
    p_run.add_argument("--workers", type=int, help="override the worker count")
    p_run.add_argument("--mode", choices=_MODES, help="override the noise mode")
    p_run.add_argument("--pairs", help="comma-separated pair labels")
    p_run.add_argument("--conditions", help="comma-separated condition labels")
    p_run.add_argument("--repetitions", type=int, help="override repetitions per condition")
    p_run.add_argument("--params", help="driver parameter YAML (default: packaged)")
    p_run.set_defaults(func=cmd_run)

    p_metrics = sub.add_parser("metrics", help="per-trial metrics from trial logs")
    p_metrics.add_argument("--trials", required=True, help="trial log directory or run directory")
    p_metrics.add_argument("--out", required=True, help="output CSV path")
    p_metrics.add_argument(
        "--gap-definition", choices=_GAP_DEFINITIONS, default="clearance", dest="gap_definition"
    )
    p_metrics.add_argument(
        "--gap-reference", choices=_GAP_REFERENCES, default="follower", dest="gap_reference"
    )
    p_metrics.set_defaults(func=cmd_metrics)

    p_export = sub.add_parser("export", help="aggregate tables and figures")
    p_export.add_argument("--trials", required=True, help="trial log directory or run directory")
    p_export.add_argument("--out", required=True, help="output directory")
    p_export.add_argument("--human", help="directory of recorded trials to overlay")
    p_export.add_argument("--schema", help="ingest schema YAML for --human")
    p_export.add_argument(
        "--gap-definition", choices=_GAP_DEFINITIONS, default="clearance", dest="gap_definition"
    )
    p_export.add_argument(
        "--gap-reference", choices=_GAP_REFERENCES, default="follower", dest="gap_reference"
    )
    p_export.add_argument("--no-figures", action="store_true", help="skip SVG rendering")
    p_export.set_defaults(func=cmd_export)

    p_grid = sub.add_parser("grid", help="build one calibration grid")
    p_grid.add_argument("--condition", required=True, help="condition label, e.g. 0_0")
    p_grid.add_argument("--config", help="YAML with grid/constants/track sections")
    p_grid.add_argument("--out", help="also write the grid to this .npz path")
    p_grid.add_argument("--no-cache", action="store_true", help="bypass the grid cache")
    p_grid.set_defaults(func=cmd_grid)

    p_cal = sub.add_parser("calibrate", help="fit thresholds from recorded trials")
    p_cal.add_argument("--data", required=True, help="directory of recorded trial CSVs")
    p_cal.add_argument("--schema", required=True, help="ingest schema YAML")
    p_cal.add_argument("--config", help="YAML with grid/constants/track sections")
    p_cal.add_argument("--out", required=True, help="output parameter YAML path")
    p_cal.add_argument("--matches", help="also write per-trial matches to this CSV")
    p_cal.add_argument("--no-cache", action="store_true", help="bypass the grid cache")
    p_cal.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
