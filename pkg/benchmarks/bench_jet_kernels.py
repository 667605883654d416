"""Time the compiled jet-convolution kernel against the numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_jet_kernels.py

The workload is the batched sum-product primitive that every tensor
contraction reduces to: out[p, q, :] = sum_c A[p, c, :] * B[q, c, :]
with * the truncated jet product.  Shapes are chosen to look like the
operator compositions the checks actually run (4 coordinates, jet order
4 and 5, contraction length up to n * fiber).
"""

import time

import numpy as np

from detourcheck.jetcalc import _jetpure, get_space, kernel


def run(impl, A, B, tables, repeats):
    tI, tJ, tK, tstarts = tables
    impl.jsum_mul(A, B, tI, tJ, tK, tstarts)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        impl.jsum_mul(A, B, tI, tJ, tK, tstarts)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    print(f"selected backend: {kernel.backend_name()}")
    header = f"{'shape':>24} {'order':>5} {'numpy':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for order in (4, 5):
        sp = get_space(4, order)
        tables = (sp.tI, sp.tJ, sp.tK, sp.tstarts)
        for P, Q, C in ((4, 4, 4), (16, 16, 8), (64, 16, 16)):
            A = rng.standard_normal((P, C, sp.size))
            B = rng.standard_normal((Q, C, sp.size))
            t_pure = run(_jetpure, A, B, tables, 5)
            t_fast = run(kernel._impl, A, B, tables, 5)
            label = f"({P},{C},M)x({Q},{C},M)"
            print(
                f"{label:>24} {order:>5} {t_pure * 1e3:>9.2f}ms"
                f" {t_fast * 1e3:>9.2f}ms {t_pure / t_fast:>7.1f}x"
            )


if __name__ == "__main__":
    main()
