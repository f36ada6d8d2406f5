"""Factorized vs explicit trace kernel at fully connected layer scale.

The explicit path materializes both rank-1 gradients (d x D each) and sums
their elementwise product; the factorized path takes two dot products.

    python benchmarks/bench_trace_kernel.py [--d 4096] [--D 4096]
"""

import argparse
import time

import numpy as np

from gradfeat import GradientFeature, trace_kernel
from gradfeat.linalg import normalize


def best_of(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def measure(d=4096, D=4096, repeats=5, seed=0):
    """Return ``(explicit_seconds, factorized_seconds, abs_difference)``."""
    rng = np.random.default_rng(seed)
    f1, f2 = (GradientFeature(a=normalize(rng.standard_normal(d)),
                              u=normalize(rng.standard_normal(D))) for _ in range(2))

    def explicit():
        A = np.outer(f1.a, f1.u)
        B = np.outer(f2.a, f2.u)
        return float(np.sum(A * B))

    diff = abs(explicit() - trace_kernel(f1, f2))
    t_explicit = best_of(explicit, repeats)
    t_factor = best_of(lambda: trace_kernel(f1, f2), repeats * 20)
    return t_explicit, t_factor, diff


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--d", type=int, default=4096)
    parser.add_argument("--D", type=int, default=4096)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    t_exp, t_fac, diff = measure(args.d, args.D, args.repeats)
    print(f"d={args.d} D={args.D}")
    print(f"explicit    {1e3 * t_exp:10.3f} ms  ({args.d * args.D * 2} floats materialized)")
    print(f"factorized  {1e3 * t_fac:10.3f} ms  ({2 * (args.d + args.D)} floats touched)")
    print(f"speedup     {t_exp / t_fac:10.0f}x   |difference| {diff:.1e}")


if __name__ == "__main__":
    main()
