"""Benchmark the numba kernels against the pure-numpy fallbacks.

Run with the default backend (numba if importable) to see both paths:

    python benchmarks/bench_kernels.py

The same module-level selection used by the library is controlled by the
RDHYST_NO_NUMBA environment variable; this script calls both variants
directly so a single invocation prints the comparison.
"""
import time

import numpy as np

from rdhyst import kernels


def timeit(fn, *args, repeat=5, inner=1):
    fn(*args)  # warm-up / JIT compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def bench_tridiag():
    n = 401
    rng = np.random.default_rng(0)
    dl = np.full(n - 1, -0.4)
    d = np.full(n, 1.8)
    du = np.full(n - 1, -0.4)
    b = rng.standard_normal(n)
    results = {"numpy": timeit(kernels.tridiag_solve_py, dl, d, du, b,
                               inner=200)}
    if kernels.HAVE_NUMBA:
        results["numba"] = timeit(kernels.tridiag_solve_jit, dl, d, du, b,
                                  inner=2000)
    return "tridiag_solve n=401", results


def bench_gagliardo():
    rng = np.random.default_rng(1)
    z = np.ascontiguousarray(rng.standard_normal((401, 2)))
    results = {"numpy": timeit(kernels.gagliardo_sum_np, z, 1 / 400, 4.0, 0.5)}
    if kernels.HAVE_NUMBA:
        results["numba"] = timeit(kernels.gagliardo_sum_jit, z, 1 / 400, 4.0,
                                  0.5)
    return "gagliardo_sum n=401", results


def bench_holder():
    rng = np.random.default_rng(2)
    z = np.ascontiguousarray(rng.standard_normal((401, 2)))
    results = {"numpy": timeit(kernels.holder_scan_np, z, 1 / 400, 0.2)}
    if kernels.HAVE_NUMBA:
        results["numba"] = timeit(kernels.holder_scan_jit, z, 1 / 400, 0.2)
    return "holder_scan n=401", results


def main():
    print(f"active backend: {kernels.backend_name()}")
    for bench in (bench_tridiag, bench_gagliardo, bench_holder):
        label, results = bench()
        parts = [f"{name}: {dt * 1e6:9.1f} us" for name, dt in results.items()]
        if "numba" in results and "numpy" in results:
            parts.append(f"speedup: {results['numpy'] / results['numba']:.1f}x")
        print(f"{label:24s} " + "  ".join(parts))


if __name__ == "__main__":
    main()
