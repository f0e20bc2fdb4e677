"""
Timing commands: the kNN grid (point counts as rows, k as columns, median milliseconds)
and best-effort forward timing of the segmentation network.
"""

import logging
import time
from typing import Callable, List, Optional

import numpy as np
from invoke import task

from pointformer.cmd.common import load_run, parse_ints
from pointformer.geo.knn import knn_brute_force, knn_search
from pointformer.geo.points import PointSet
from pointformer.harness.trainer import build_model
from pointformer.util.context import RunContext, parse_seed

logger = logging.getLogger(__name__)

DEFAULT_SIZES = "10000,20000,40000,80000"
DEFAULT_KS = "8,16,32,64,128,256"


def median_ms(fn: Callable[[], object], repeats: int) -> float:
    """Median wall time of `repeats` calls on the monotonic clock, in milliseconds."""
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1000.0)
    return float(np.median(times))


@task(
    help={
        "sizes": f"Point counts, comma-separated (default {DEFAULT_SIZES})",
        "ks": f"Neighbor counts, comma-separated (default {DEFAULT_KS})",
        "repeats": "Timed repeats per cell; the median is reported",
        "out": "Output directory for bench_knn.csv",
        "naive": "Also time the brute-force sort",
        "naive_limit_mb": "Skip brute-force rows whose distance matrix exceeds this size",
        "seed": "Seed for the random clouds",
    }
)
@RunContext.wrap_context
def cmd_bench_knn(
    c: RunContext,
    sizes: str = DEFAULT_SIZES,
    ks: str = DEFAULT_KS,
    repeats: str = "5",
    out: str = "runs/bench",
    naive: bool = False,
    naive_limit_mb: str = "2048",
    seed: str = "0",
) -> None:
    """Time kNN self-queries on uniform random clouds; writes bench_knn.csv."""
    point_counts = parse_ints("sizes", sizes)
    neighbor_counts = parse_ints("ks", ks)
    n_repeats = parse_ints("repeats", repeats)[0]
    limit_bytes = parse_ints("naive_limit_mb", naive_limit_mb)[0] * 2**20
    rng = np.random.default_rng(parse_seed(seed) or 0)
    c.use_out_dir(out)
    c.section(f"kNN timing, median of {n_repeats} (ms)")

    methods = [("heap", knn_search)]
    if naive:
        methods.append(("brute", knn_brute_force))
    rows: List[List[object]] = []
    for n in point_counts:
        points = rng.uniform(size=(n, 3)).astype(np.float32)
        for method, fn in methods:
            if method == "brute" and n * n * points.itemsize > limit_bytes:
                c.warn(f"{n} points: brute-force distance matrix exceeds {naive_limit_mb} MB")
                continue
            row = _knn_row(c, fn, points, neighbor_counts, n_repeats, method)
            if row is not None:
                rows.append([n, method] + row)

    header = ["points", "method"] + [f"k_{k}" for k in neighbor_counts]
    c.table(header, rows)
    c.write_csv("bench_knn.csv", header, rows)
    c.status(True, f"{len(rows)} row(s)")


def _knn_row(c: RunContext, fn, points, ks, repeats, method) -> Optional[List[object]]:
    n = len(points)
    cells: List[object] = []
    try:
        for k in ks:
            if k > n:
                cells.append("")
                continue
            cells.append(round(median_ms(lambda: fn(points, points, k), repeats), 3))
            logger.debug(f"{method} n={n} k={k}: {cells[-1]} ms")
    except MemoryError:
        c.warn(f"{n} points ({method}): out of memory, row skipped")
        return None
    return cells


@task(
    help={
        "config": "Config file(s) describing the network",
        "sizes": "Point counts, comma-separated",
        "repeats": "Timed repeats per size; the median is reported",
        "out": "Output directory for bench_net.csv",
        "seed": "Seed for weights and clouds",
        "override": "section.key=value, repeatable",
    },
    iterable=["override"],
)
@RunContext.wrap_context
def cmd_bench_net(
    c: RunContext,
    config: str = "",
    sizes: str = "1024,4096,16384",
    repeats: str = "3",
    out: str = "runs/bench",
    seed: str = "",
    override: Optional[List[str]] = None,
) -> None:
    """Time full forward passes (geometry plan included); writes bench_net.csv."""
    point_counts = parse_ints("sizes", sizes)
    n_repeats = parse_ints("repeats", repeats)[0]
    _, run = load_run(c, config, out, seed, override)
    model = build_model(run)
    model.eval()
    rng = np.random.default_rng(run.seed)
    c.section(f"{run.backbone.head} forward timing, widths {list(run.backbone.widths)}")

    rows = []
    for n in point_counts:
        if n < run.backbone.min_points:
            c.warn(f"{n} points: the network needs at least {run.backbone.min_points}")
            continue
        cloud = PointSet(rng.uniform(size=(n, 3)))
        x = model.input_features(cloud)
        try:
            ms = median_ms(lambda: model.forward(x, model.plan(cloud)), n_repeats)
        except MemoryError:
            c.warn(f"{n} points: out of memory, row skipped")
            continue
        rows.append((n, round(ms, 3)))

    c.table(["points", "median_ms"], rows)
    c.write_csv("bench_net.csv", ["points", "median_ms"], rows)
    c.status(True, f"{len(rows)} size(s)")
