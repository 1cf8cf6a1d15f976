"""Benchmark the compiled threshold/norm kernels against the numpy fallback.

Run as: python3 benchmarks/bench_kernels.py [--n 64] [--repeats 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from besovflow._kernels import _fallback

try:
    from besovflow._kernels import _speedups
except ImportError:
    _speedups = None


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    samples = rng.standard_normal((3, args.n, args.n, args.n))
    samples[:, ::7, ::5, ::3] *= 40.0  # give the threshold something to cut
    cut = float(np.percentile(np.linalg.norm(samples, axis=0), 95))

    rows = []
    for name, mod in [("fallback", _fallback), ("compiled", _speedups)]:
        if mod is None:
            print("compiled kernels unavailable; skipping")
            continue
        t_split, (low, high) = timeit(
            lambda m=mod: m.magnitude_threshold_split(samples, cut),
            args.repeats)
        t_norm, val = timeit(lambda m=mod: m.lp_norm_pow(samples, 4.0),
                             args.repeats)
        rows.append((name, t_split, t_norm, low, high, val))

    print(f"n = {args.n}^3, repeats = {args.repeats} (best-of)")
    print(f"{'kernel':<10} {'split [ms]':>12} {'lp_norm [ms]':>14}")
    for name, ts, tn, *_ in rows:
        print(f"{name:<10} {ts * 1e3:>12.2f} {tn * 1e3:>14.2f}")

    if len(rows) == 2:
        (_, ts0, tn0, low0, high0, v0), (_, ts1, tn1, low1, high1, v1) = rows
        arrays_exact = (np.array_equal(low0, low1)
                        and np.array_equal(high0, high1))
        # the scalar norm accumulates in a different order; allow rounding
        norm_close = abs(v0 - v1) <= 1e-12 * abs(v0)
        agree = arrays_exact and norm_close
        print(f"agreement: {'ok' if agree else 'MISMATCH'}"
              f" (split exact: {arrays_exact},"
              f" norm rel diff: {abs(v0 - v1) / abs(v0):.2e})")
        print(f"speedup:   split x{ts0 / ts1:.2f}, lp_norm x{tn0 / tn1:.2f}")


if __name__ == "__main__":
    main()
