#!/usr/bin/env python3
"""Benchmark the pair-classification kernel: numba JIT vs pure-numpy fallback.

The default workload mirrors a full evaluation campaign: 54 systems scored
on 2,000 segments for 3 language pairs (~8.6M pair comparisons). Run after
installing the package:

    python benchmarks/bench_tau_kernels.py
    GEMBA_DISABLE_NUMBA=1 gemba evaluate ...   # same flag works package-wide
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from gemba import _kernels


def make_workload(systems: int, segments: int, pairs: int, seed: int = 7):
    rng = np.random.default_rng(seed)
    groups = segments * pairs
    metric = rng.integers(0, 20, size=groups * systems).astype(np.int64)
    gold = rng.integers(0, 8, size=groups * systems).astype(np.int64)
    offsets = np.arange(0, groups * systems + 1, systems, dtype=np.int64)
    return metric, gold, offsets


def bench(fn, args, repeat: int) -> tuple[float, np.ndarray]:
    fn(*args)  # warm-up (and JIT compile for the numba path)
    best = float("inf")
    result = None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--systems", type=int, default=54)
    parser.add_argument("--segments", type=int, default=2000)
    parser.add_argument("--pairs", type=int, default=3)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    metric, gold, offsets = make_workload(args.systems, args.segments, args.pairs)
    n_pairs = (len(offsets) - 1) * args.systems * (args.systems - 1) // 2
    print(
        f"workload: {args.systems} systems x {args.segments} segments x "
        f"{args.pairs} language pairs = {n_pairs:,} comparisons"
    )

    rows = []
    if _kernels.HAS_NUMBA:
        t, counts_njit = bench(_kernels._count_pairs_njit, (metric, gold, offsets), args.repeat)
        rows.append(("numba @njit", t, counts_njit))
    else:
        print("numba unavailable; benchmarking the fallback only")
    t, counts_np = bench(_kernels._count_pairs_numpy, (metric, gold, offsets), args.repeat)
    rows.append(("pure numpy", t, counts_np))

    for name, seconds, counts in rows:
        rate = n_pairs / seconds / 1e6
        print(f"{name:>12}: {seconds * 1e3:8.2f} ms   {rate:8.1f} M pairs/s   counts={counts.tolist()}")
    if len(rows) == 2:
        assert (rows[0][2] == rows[1][2]).all(), "kernel paths disagree"
        print(f"speedup: {rows[1][1] / rows[0][1]:.1f}x, identical counts")


if __name__ == "__main__":
    main()
