"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time: if numba is importable and the
environment variable ``RDHYST_NO_NUMBA`` is not set to a truthy value,
kernels are compiled with ``@njit(cache=True)``; otherwise the plain
Python/numpy reference implementations are used.  Both variants are kept
importable (``*_py`` / ``*_jit``) so tests and ``benchmarks/bench_kernels.py``
can compare them directly.
"""
from __future__ import annotations

import os

import numpy as np

_TRUTHY = {"1", "true", "yes", "on"}


def _numba_disabled() -> bool:
    return os.environ.get("RDHYST_NO_NUMBA", "").strip().lower() in _TRUTHY


HAVE_NUMBA = False
if not _numba_disabled():
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - exercised via env flag instead
        HAVE_NUMBA = False


def tridiag_solve_py(dl, d, du, b):
    """Solve a tridiagonal system by the Thomas algorithm, O(n).

    dl: sub-diagonal (n-1,), d: diagonal (n,), du: super-diagonal (n-1,),
    b: right-hand side (n,).  The systems produced by the diffusion step
    are strictly diagonally dominant, so no pivoting is needed.
    """
    n = d.shape[0]
    cp = np.empty(n - 1, dtype=np.float64)
    x = np.empty(n, dtype=np.float64)
    denom = d[0]
    cp[0] = du[0] / denom
    x[0] = b[0] / denom
    for i in range(1, n - 1):
        denom = d[i] - dl[i - 1] * cp[i - 1]
        cp[i] = du[i] / denom
        x[i] = (b[i] - dl[i - 1] * x[i - 1]) / denom
    denom = d[n - 1] - dl[n - 2] * cp[n - 2]
    x[n - 1] = (b[n - 1] - dl[n - 2] * x[n - 2]) / denom
    for i in range(n - 2, -1, -1):
        x[i] = x[i] - cp[i] * x[i + 1]
    return x


def gagliardo_sum_py(z, h, q, frac):
    """Double-sum discretization of the fractional seminorm integrand.

    z: (npts, d) values of the [l]-th derivative, h: grid spacing,
    q: integrability exponent, frac: fractional part l - [l].
    Returns sum over i != j of h^2 |z_i - z_j|^q / |x_i - x_j|^(1 + q*frac)
    (Euclidean norm across the d components).
    """
    npts, d = z.shape
    expo = 1.0 + q * frac
    total = 0.0
    for i in range(npts):
        for j in range(i + 1, npts):
            s = 0.0
            for c in range(d):
                diff = z[i, c] - z[j, c]
                s += diff * diff
            dist = (j - i) * h
            total += (s ** (q / 2.0)) / (dist ** expo)
    return 2.0 * total * h * h


def holder_scan_py(z, h, gamma):
    """Max over i != j of |z_i - z_j| / |x_i - x_j|^gamma (Euclidean in d)."""
    npts, d = z.shape
    best = 0.0
    for i in range(npts):
        for j in range(i + 1, npts):
            s = 0.0
            for c in range(d):
                diff = z[i, c] - z[j, c]
                s += diff * diff
            quot = np.sqrt(s) / (((j - i) * h) ** gamma)
            if quot > best:
                best = quot
    return best


def _gagliardo_sum_np(z, h, q, frac):
    npts = z.shape[0]
    diff = z[:, None, :] - z[None, :, :]
    dist2 = np.einsum("ijc,ijc->ij", diff, diff)
    idx = np.arange(npts)
    sep = np.abs(idx[:, None] - idx[None, :]) * h
    np.fill_diagonal(sep, 1.0)  # diagonal excluded below
    vals = dist2 ** (q / 2.0) / sep ** (1.0 + q * frac)
    np.fill_diagonal(vals, 0.0)
    return float(vals.sum() * h * h)


def _holder_scan_np(z, h, gamma):
    npts = z.shape[0]
    diff = z[:, None, :] - z[None, :, :]
    dist = np.sqrt(np.einsum("ijc,ijc->ij", diff, diff))
    idx = np.arange(npts)
    sep = np.abs(idx[:, None] - idx[None, :]) * h
    np.fill_diagonal(sep, 1.0)
    quot = dist / sep ** gamma
    np.fill_diagonal(quot, 0.0)
    return float(quot.max())


if HAVE_NUMBA:
    tridiag_solve_jit = njit(cache=True)(tridiag_solve_py)
    gagliardo_sum_jit = njit(cache=True)(gagliardo_sum_py)
    holder_scan_jit = njit(cache=True)(holder_scan_py)

    tridiag_solve = tridiag_solve_jit
    gagliardo_sum = gagliardo_sum_jit
    holder_scan = holder_scan_jit
else:  # pure-numpy fallback path
    tridiag_solve = tridiag_solve_py
    gagliardo_sum = _gagliardo_sum_np
    holder_scan = _holder_scan_np

# numpy reference implementations under stable names for tests/benchmarks
gagliardo_sum_np = _gagliardo_sum_np
holder_scan_np = _holder_scan_np


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
