"""Shared fixtures.

The acceptance tests consume a three-seed batch of full-size runs.  It
is expensive (about ten minutes) and therefore built once per session,
and only when a test actually asks for it.
"""

from __future__ import annotations

import time

import pytest

from ceimerge.analysis import metrics_frame
from ceimerge.engine import load_parameters, run_batch


@pytest.fixture(scope="session", autouse=True)
def _isolated_grid_cache(tmp_path_factory):
    # keep calibration grids out of the user's cache directory
    cache = tmp_path_factory.mktemp("gridcache")
    import os

    old = os.environ.get("CEIMERGE_CACHE")
    os.environ["CEIMERGE_CACHE"] = str(cache)
    yield cache
    if old is None:
        os.environ.pop("CEIMERGE_CACHE", None)
    else:
        os.environ["CEIMERGE_CACHE"] = old


@pytest.fixture(scope="session")
def batch3():
    """Default-size batches at three base seeds, as metric frames.

    Returns dict with per-seed frames, per-seed wall-clock seconds and
    the trial count per seed.
    """
    pairs = load_parameters()
    frames = []
    seconds = []
    counts = []
    for seed in (0, 1, 2):
        started = time.perf_counter()
        logs = run_batch(pairs, repetitions=10, base_seed=seed, workers=1)
        seconds.append(time.perf_counter() - started)
        counts.append(len(logs))
        df = metrics_frame(logs)
        df["base_seed"] = seed
        frames.append(df)
        del logs
    return {"frames": frames, "seconds": seconds, "counts": counts}
