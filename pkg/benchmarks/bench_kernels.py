"""Benchmark the numpy (BLAS) kernel path against the numba JIT path.

The pairwise max-cosine reduction dominates alignment and BERTScore runtime.
Run from the repository root:

    python benchmarks/bench_kernels.py

Both code paths are timed directly regardless of the REFREV_NUMBA dispatch
flag. On a machine with a tuned BLAS the numpy path wins, which is why it is
the default; the JIT path avoids materializing the similarity matrix and is
kept for BLAS-less environments (enable with REFREV_NUMBA=1).
"""

import time

import numpy as np

from refrev import kernels

CASES = [
    ("sentence pair   16x64   vs   24x64", (16, 24, 64), 2000),
    ("alignment batch 24x128  vs  160x128", (24, 160, 128), 500),
    ("summary scoring 384x768 vs 2048x768", (384, 2048, 768), 10),
]


def timeit(fn, reps):
    fn()  # warm cache / JIT
    start = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - start) / reps


def main():
    print(f"numba available: {kernels.have_numba()}; "
          f"JIT dispatch active: {kernels.using_numba()}")
    header = f"{'case':<38} {'numpy (ms)':>12} {'jit (ms)':>12} {'numpy speedup':>14}"
    print(header)
    print("-" * len(header))
    rng = np.random.default_rng(0)
    for name, (n, m, d), reps in CASES:
        a = kernels.normalize_rows(rng.normal(size=(n, d)))
        b = kernels.normalize_rows(rng.normal(size=(m, d)))
        t_np = timeit(lambda: (kernels._max_rows_np(a, b),
                               kernels._max_both_np(a, b)), reps)
        if kernels.have_numba():
            t_jit = timeit(lambda: (kernels._max_rows_jit(a, b),
                                    kernels._max_both_jit(a, b)), reps)
            ratio = f"{t_jit / t_np:12.2f}x"
            print(f"{name:<38} {t_np * 1e3:12.3f} {t_jit * 1e3:12.3f} {ratio:>14}")
        else:
            print(f"{name:<38} {t_np * 1e3:12.3f} {'-':>12} {'-':>14}")


if __name__ == "__main__":
    main()
