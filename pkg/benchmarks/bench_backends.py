"""Throughput comparison of the compiled and pure-Python chain kernels.

Runs the three hot loops (fitted-chain replication, rank-chain replication,
bulk normal generation) against both backend modules on identical inputs,
checks the outputs agree bit for bit, and reports best-of-N wall times.

Usage:
    python3 benchmarks/bench_backends.py [--reps N] [--rank-reps N] [--repeat N]
"""

import argparse
import importlib
import time

import numpy as np

BUG_NONE = 0
SCAN_RANDOM = 0
GEN = (0.0, 10.0, 0.0, 0.1)


def load_backends():
    mods = {}
    mods["python"] = importlib.import_module("mcverify.gaussian._fallback")
    try:
        mods["c"] = importlib.import_module("mcverify.gaussian._core")
    except ImportError:
        pass
    return mods


def bench(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def fitted_workload(mod, key, reps, L):
    out = np.empty((reps, 3), dtype=np.float64)

    def run():
        mod.two_sample_fitted_chunk(
            key, 0, reps, L, False, *GEN, *GEN, BUG_NONE, SCAN_RANDOM, out,
        )

    return run, lambda: out.copy()


def rank_workload(mod, key, reps, L, thin):
    states = np.empty((reps, L, 3), dtype=np.float64)
    ms = np.empty(reps, dtype=np.int64)

    def run():
        mod.rank_chunk(
            key, 0, reps, L, thin, 0.0, *GEN, *GEN, BUG_NONE, SCAN_RANDOM,
            states, ms,
        )

    return run, lambda: (states.copy(), ms.copy())


def normals_workload(mod, key, n):
    out = np.empty(n, dtype=np.float64)

    def run():
        mod.fill_normals(key, 0, n, 0.0, 1.0, out)

    return run, lambda: out.copy()


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=2000, help="fitted-chain replications")
    ap.add_argument("--L", type=int, default=50, help="kernel steps per fitted chain")
    ap.add_argument("--rank-reps", type=int, default=1000, help="rank-chain replications")
    ap.add_argument("--rank-L", type=int, default=10, help="states per rank chain")
    ap.add_argument("--thin", type=int, default=5, help="kernel steps per rank state")
    ap.add_argument("--normals", type=int, default=2_000_000, help="bulk normal draws")
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats (best kept)")
    ap.add_argument("--key", type=int, default=2026)
    args = ap.parse_args()

    mods = load_backends()
    if "c" not in mods:
        print("compiled backend not importable; timing pure Python only")

    cases = [
        (f"fitted chains  reps={args.reps} L={args.L}",
         lambda m: fitted_workload(m, args.key, args.reps, args.L)),
        (f"rank chains    reps={args.rank_reps} L={args.rank_L} thin={args.thin}",
         lambda m: rank_workload(m, args.key, args.rank_reps, args.rank_L, args.thin)),
        (f"normal draws   n={args.normals}",
         lambda m: normals_workload(m, args.key, args.normals)),
    ]

    width = max(len(label) for label, _ in cases)
    print(f"{'workload'.ljust(width)}  {'python':>10}  {'c':>10}  {'speedup':>8}")
    for label, make in cases:
        times = {}
        results = {}
        for name, mod in mods.items():
            run, snapshot = make(mod)
            run()  # warmup, also fills the buffers for the equality check
            results[name] = snapshot()
            times[name] = bench(run, args.repeat)
        if "c" in mods:
            assert same(results["python"], results["c"]), f"backend mismatch: {label}"
            ratio = times["python"] / times["c"]
            print(f"{label.ljust(width)}  {times['python']:>9.4f}s  "
                  f"{times['c']:>9.4f}s  {ratio:>7.1f}x")
        else:
            print(f"{label.ljust(width)}  {times['python']:>9.4f}s  {'-':>10}  {'-':>8}")


if __name__ == "__main__":
    main()
