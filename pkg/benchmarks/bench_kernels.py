"""Benchmark the compiled batched cost kernel against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--edges N] [--reps R]
"""

import argparse
import time

import numpy as np

from poaphases import kernels
from poaphases.costs import (
    AffineCost,
    BPRCost,
    PiecewiseC1Cost,
    PolynomialCost,
    build_cost_table,
)


def make_table(n_edges: int, rng):
    costs = []
    for i in range(n_edges):
        kind = i % 4
        if kind == 0:
            costs.append(AffineCost(rng.uniform(0.5, 2.0), rng.uniform(0.0, 5.0)))
        elif kind == 1:
            costs.append(PolynomialCost((rng.uniform(0.0, 1.0), 0.0, rng.uniform(0.1, 1.0))))
        elif kind == 2:
            costs.append(BPRCost(1.0, rng.uniform(1.0, 3.0), 0.15, 4.0))
        else:
            costs.append(PiecewiseC1Cost(1.0, (0.0, 2.0, -1.0), (2.0, -2.0, 1.0)))
    return build_cost_table(costs)


def bench(fn, table, xs, reps):
    out = np.empty_like(xs[0])
    # Warm up (and trigger compilation for the jitted path).
    fn(table.kinds, table.params, table.ext_slope, table.value_at_zero,
       xs[0], kernels.MODE_VALUE, out)
    start = time.perf_counter()
    for r in range(reps):
        for mode in (kernels.MODE_VALUE, kernels.MODE_DERIV, kernels.MODE_PRIMITIVE):
            fn(table.kinds, table.params, table.ext_slope, table.value_at_zero,
               xs[r % len(xs)], mode, out)
    return (time.perf_counter() - start) / reps


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--edges", type=int, default=20_000)
    ap.add_argument("--reps", type=int, default=200)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    table = make_table(args.edges, rng)
    xs = [rng.uniform(-1.0, 5.0, size=args.edges) for _ in range(8)]

    t_np = bench(kernels.eval_batch_numpy, table, xs, args.reps)
    print(f"numpy fallback : {t_np * 1e3:9.3f} ms per 3-mode pass ({args.edges} edges)")
    if kernels.eval_batch_numba is not None:
        t_nb = bench(kernels.eval_batch_numba, table, xs, args.reps)
        print(f"compiled kernel: {t_nb * 1e3:9.3f} ms per 3-mode pass")
        print(f"speedup        : {t_np / t_nb:9.2f}x")
    else:
        print("compiled kernel unavailable (numba not importable)")


if __name__ == "__main__":
    main()
