"""k_max sweeps: build cost, index size, and per-query traffic and latency."""
from __future__ import annotations

import csv
import io
import random
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import kernels
from .client import Client
from .cloud import CloudIndex
from .crypto import setup
from .geo import Dataset, QuerySpec
from .index import build_plain_trees, index_gen
from .records import index_bytes
from .transport import LoopbackTransport

# columns whose values depend on wall-clock time
TIMING_SUFFIXES = ("_ms_mean", "_ms_median", "_s_mean", "_s_median")

COLUMNS = [
    "k_max", "runs", "n_objects", "entries", "height", "index_bytes",
    "build_s_mean", "build_s_median",
    "trapdoor_bytes", "candidate_bytes", "rsk_tokens", "rsk_entries",
    "trapdoor_ms_mean", "trapdoor_ms_median",
    "cloud_ms_mean", "cloud_ms_median",
    "client_ms_mean", "client_ms_median",
    "rsk_total_ms_mean", "rsk_total_ms_median",
    "knn_rounds", "knn_total_ms_mean", "knn_total_ms_median",
]


@dataclass
class Workload:
    n_queries: int = 100
    radius_frac: float = 0.01
    k: int = 10
    seed: int = 0


def sample_queries(d: Dataset, wl: Workload):
    """Range and kNN queries centered on objects drawn from the dataset, each
    using one keyword of its center object."""
    rng = random.Random(wl.seed)
    centers = [d.objects[i] for i in sorted(rng.sample(range(len(d)), min(wl.n_queries, len(d))))]
    ranges, knns = [], []
    for o in centers:
        w = rng.choice(sorted(o.psi))
        ranges.append(QuerySpec.range(o.p.x, o.p.y, [w], wl.radius_frac * d.width))
        knns.append(QuerySpec.knn(o.p.x, o.p.y, [w], wl.k))
    return ranges, knns


def _summary(values):
    return statistics.fmean(values), statistics.median(values)


def _run_queries(cloud, keys, sp, queries, method, workers):
    def one(chunk):
        client = Client(LoopbackTransport(cloud), keys, sp)
        run = getattr(client, method)
        return [run(q).stats for q in chunk]

    if workers <= 1:
        return one(queries)
    chunks = [queries[i::workers] for i in range(workers)]
    with ThreadPoolExecutor(workers) as pool:
        return [s for part in pool.map(one, chunks) for s in part]


def bench_config(d: Dataset, k_max: int, wl: Workload, runs: int = 5, seed: int = 0,
                 workers: int = 1) -> dict:
    keys = setup(128, seed=seed)
    build_times = []
    for _ in range(runs):
        t0 = time.perf_counter()
        trees = build_plain_trees(d, k_max)
        tree, sp = index_gen(d, k_max, keys, rng=random.Random(seed), trees=trees)
        build_times.append(time.perf_counter() - t0)
    cloud = CloudIndex(tree, sp.lam // 8, keep_log=False)
    ranges, knns = sample_queries(d, wl)

    per_run = {"trapdoor": [], "cloud": [], "client": [], "rsk": [], "knn": []}
    for _ in range(runs):
        rs = _run_queries(cloud, keys, sp, ranges, "run_range", workers)
        ks = _run_queries(cloud, keys, sp, knns, "run_knn", workers)
        per_run["trapdoor"].append(statistics.fmean(s.trapdoor_s for s in rs) * 1e3)
        per_run["cloud"].append(statistics.fmean(s.cloud_s for s in rs) * 1e3)
        per_run["client"].append(statistics.fmean(s.client_s for s in rs) * 1e3)
        per_run["rsk"].append(statistics.fmean(s.total_s for s in rs) * 1e3)
        per_run["knn"].append(statistics.fmean(s.total_s for s in ks) * 1e3)

    row = {
        "k_max": k_max, "runs": runs, "n_objects": len(d), "entries": tree.count,
        "height": sp.d, "index_bytes": len(index_bytes(tree, sp)),
        "trapdoor_bytes": round(statistics.fmean(s.bytes_sent for s in rs), 3),
        "candidate_bytes": round(statistics.fmean(s.bytes_received for s in rs), 3),
        "rsk_tokens": round(statistics.fmean(s.tokens for s in rs), 3),
        "rsk_entries": round(statistics.fmean(s.entries for s in rs), 3),
        "knn_rounds": round(statistics.fmean(s.rounds for s in ks), 3),
    }
    row["build_s_mean"], row["build_s_median"] = _summary(build_times)
    for name, col in (("trapdoor", "trapdoor_ms"), ("cloud", "cloud_ms"), ("client", "client_ms"),
                      ("rsk", "rsk_total_ms"), ("knn", "knn_total_ms")):
        row[col + "_mean"], row[col + "_median"] = _summary(per_run[name])
    return {c: row[c] for c in COLUMNS}


def cmd_bench(d: Dataset, k_values, wl: Workload | None = None, seed: int = 0, runs: int = 5,
              workers: int = 1, progress=None) -> list:
    """One row per ``k_max`` in ``k_values``."""
    wl = wl or Workload(seed=seed)
    kernels.warm_up()
    rows = []
    for k in k_values:
        rows.append(bench_config(d, int(k), wl, runs, seed, workers))
        if progress:
            progress(rows[-1])
    return rows


def to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def is_timing_column(name: str) -> bool:
    return name.endswith(TIMING_SUFFIXES)
