"""Compare the numba and pure-numpy kernel implementations.

    python3 benchmarks/bench_kernels.py [--n 200000] [--repeat 5]

Prints one CSV row per kernel with the best-of-``repeat`` time of each path
and checks that both return identical arrays.
"""
import argparse
import time

import numpy as np

from risk import kernels


def best_of(fn, repeat):
    fn()  # compile / warm caches
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    t = rng.random((args.n, 2))
    ix = kernels.grid_indices(t[:, 0], kernels.DEPTH_CAP)
    iy = kernels.grid_indices(t[:, 1], kernels.DEPTH_CAP)
    codes = np.sort(kernels.morton_np(ix, iy))
    m = min(args.n, 4000)
    xs, ys = t[:m, 0].copy(), t[:m, 1].copy()
    ranks = rng.permutation(m).astype(np.int64)
    centers = rng.random((256, 2))
    exclude = np.full(256, -1, np.int64)
    d = 9

    cases = {
        "morton": (lambda: kernels.morton_nb(ix, iy), lambda: kernels.morton_np(ix, iy)),
        "leaves": (lambda: kernels.leaves_nb(codes, 16, kernels.DEPTH_CAP),
                   lambda: kernels.leaves_np(codes, 16, kernels.DEPTH_CAP)),
        "knn": (lambda: kernels.knn_nb(xs, ys, ranks, centers[:, 0], centers[:, 1], exclude, 16),
                lambda: kernels.knn_np(xs, ys, ranks, centers[:, 0], centers[:, 1], exclude, 16)),
        "cover_cells": (lambda: kernels.cover_cells_nb(10, 170, 40, 200, d),
                        lambda: kernels.cover_cells_np(10, 170, 40, 200, d)),
    }
    print("kernel,numba_ms,numpy_ms,speedup,identical")
    for name, (nb, npf) in cases.items():
        a, b = nb(), npf()
        a = a if isinstance(a, tuple) else (a,)
        b = b if isinstance(b, tuple) else (b,)
        same = all(np.array_equal(x, y) for x, y in zip(a, b))
        t_nb = best_of(nb, args.repeat)
        t_np = best_of(npf, args.repeat)
        print(f"{name},{t_nb * 1e3:.3f},{t_np * 1e3:.3f},{t_np / t_nb:.1f},{same}")


if __name__ == "__main__":
    main()
