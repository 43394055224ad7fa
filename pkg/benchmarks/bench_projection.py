#!/usr/bin/env python3
"""Benchmark the compiled projection kernels against the numpy fallback.

Usage: python benchmarks/bench_projection.py [--sizes 200,500,1000]
"""

import argparse
import time

import numpy as np

from balcor.projection import ProjectionConfig, get_kernels, joint_affinities


def time_call(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench(n, dim, kernels):
    rng = np.random.default_rng(0)
    X = np.ascontiguousarray(rng.normal(size=(n, dim)))
    Y = np.ascontiguousarray(rng.normal(0, 1e-2, size=(n, 2)))
    D2 = kernels.pairwise_sq_dists(X)
    P = joint_affinities(X, 30.0, kernels=kernels)
    return {
        "pairwise": time_call(kernels.pairwise_sq_dists, X),
        "affinities": time_call(
            lambda: kernels.conditional_affinities(D2, np.log(30.0), 1e-5, 50)),
        "gradient": time_call(kernels.gradient, P, Y),
        "kl": time_call(kernels.kl_divergence, P, Y, 1e-12),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="200,500,1000")
    parser.add_argument("--dim", type=int, default=16)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    numpy_k = get_kernels("numpy")
    try:
        compiled_k = get_kernels("compiled")
    except ImportError:
        print("compiled kernels not built; run pip install -e . first")
        return

    header = f"{'n':>6} {'kernel':>11} {'numpy (s)':>11} {'compiled (s)':>13} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        np_times = bench(n, args.dim, numpy_k)
        cy_times = bench(n, args.dim, compiled_k)
        for name in np_times:
            speedup = np_times[name] / cy_times[name] if cy_times[name] else float("inf")
            print(f"{n:>6} {name:>11} {np_times[name]:>11.4f} "
                  f"{cy_times[name]:>13.4f} {speedup:>7.1f}x")
        print()


if __name__ == "__main__":
    main()
