"""Pointwise relay hysteresis: region classification, configuration updates
along piecewise-linear input trajectories, and branch evaluation.

The relay carries a configuration zeta in {+1, -1}.  Two scalar functions
gamma_alpha, gamma_beta of the input u define the threshold manifolds
Gamma_alpha = {gamma_alpha = 0} and Gamma_beta = {gamma_beta = 0} and the
regions

    M_alpha      = {gamma_alpha <= 0}   (forces zeta = +1),
    M_beta       = {gamma_beta  <= 0}   (forces zeta = -1),
    M_alphabeta  = {both > 0}           (zeta keeps its value).

Along an input trajectory the configuration is decided by the most recent
threshold hit.  Between samples the trajectory is the straight segment
u(s) = (1-s) u_old + s u_new; hits are located by a 64-point scan followed
by bisection, and the largest-parameter hit wins.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, ModelError

__all__ = [
    "Region",
    "ThresholdPair",
    "BranchPair",
    "classify_region",
    "init_configuration",
    "advance_configuration",
    "advance_configuration_field",
    "evaluate_output",
    "evaluate_output_field",
    "relay_trace",
]

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
NEAR_MISS_BAND = 1e-9
SCAN_SUBPOINTS = 64
_BISECT_ITERS = 44  # (1/64) * 2^-44 ~ 9e-16 < 1e-12 relative parameter tol


class Region(enum.Enum):
    ALPHA = "alpha"
    BETA = "beta"
    ALPHA_BETA = "alpha_beta"
    ON_GAMMA_ALPHA = "on_gamma_alpha"
    ON_GAMMA_BETA = "on_gamma_beta"


@dataclass(frozen=True)
class ThresholdPair:
    """gamma_alpha/gamma_beta as vectorized callables of u with shape
    (..., k) -> (...); gradients (optional) map (..., k) -> (..., k).

    ``lower``/``upper`` are optional admissibility bounds on u components;
    evaluation outside them is a domain error (e.g. the floor keeping the
    bacteria model away from the 1/u2 singularity)."""

    gamma_alpha: Callable[[np.ndarray], np.ndarray]
    gamma_beta: Callable[[np.ndarray], np.ndarray]
    grad_alpha: Optional[Callable[[np.ndarray], np.ndarray]] = None
    grad_beta: Optional[Callable[[np.ndarray], np.ndarray]] = None
    k: int = 1
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def check_admissible(self, u: np.ndarray) -> None:
        u = np.asarray(u, dtype=np.float64)
        if self.lower is not None and np.any(u < self.lower):
            raise DomainError(
                f"input below the admissible floor {np.asarray(self.lower)}")
        if self.upper is not None and np.any(u > self.upper):
            raise DomainError(
                f"input above the admissible ceiling {np.asarray(self.upper)}")


@dataclass(frozen=True)
class BranchPair:
    """Output branches: w_plus on {gamma_beta >= 0}, w_minus on
    {gamma_alpha >= 0}, both mapping (..., k) -> (..., m)."""

    w_plus: Callable[[np.ndarray], np.ndarray]
    w_minus: Callable[[np.ndarray], np.ndarray]
    m: int = 1

    def eval_branch(self, zeta: int, u: np.ndarray) -> np.ndarray:
        fn = self.w_plus if zeta == 1 else self.w_minus
        w = np.asarray(fn(np.asarray(u, dtype=np.float64)), dtype=np.float64)
        if not np.all(np.isfinite(w)):
            raise DomainError(
                f"branch W_{zeta:+d} produced a non-finite value")
        return w


def _as_point(u, k):
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 0:
        u = u[None]
    if u.shape[-1] != k:
        raise ValueError(f"input has {u.shape[-1]} components, expected {k}")
    return u


def classify_region(thresholds: ThresholdPair, u, tol: float = DEFAULT_TOL) -> Region:
    """Classify a single input point relative to the threshold manifolds."""
    u = _as_point(u, thresholds.k)
    thresholds.check_admissible(u)
    ga = float(thresholds.gamma_alpha(u))
    gb = float(thresholds.gamma_beta(u))
    if ga <= tol and gb <= tol:
        raise ModelError(
            f"thresholds not disjoint at u={u}: gamma_alpha={ga:g}, "
            f"gamma_beta={gb:g} are both <= {tol:g}")
    if ga < -tol:
        return Region.ALPHA
    if abs(ga) <= tol:
        return Region.ON_GAMMA_ALPHA
    if gb < -tol:
        return Region.BETA
    if abs(gb) <= tol:
        return Region.ON_GAMMA_BETA
    return Region.ALPHA_BETA


def init_configuration(thresholds: ThresholdPair, zeta0: int, u0,
                       tol: float = DEFAULT_TOL) -> int:
    """Initial configuration: forced +1 on M_alpha, forced -1 on M_beta,
    zeta0 retained on M_alphabeta."""
    if zeta0 not in (1, -1):
        raise ValueError(f"zeta0 must be +1 or -1, got {zeta0}")
    region = classify_region(thresholds, u0, tol)
    if region in (Region.ALPHA, Region.ON_GAMMA_ALPHA):
        return 1
    if region in (Region.BETA, Region.ON_GAMMA_BETA):
        return -1
    return zeta0


def _segment_last_hits(thresholds: ThresholdPair, u_old: np.ndarray,
                       u_new: np.ndarray, subpoints: int, tol: float):
    """Latest threshold hit of each gamma along straight segments.

    u_old, u_new: (B, k).  Returns (s_alpha, s_beta, near_miss) where the
    s arrays are (B,) hit parameters in (0, 1] or nan when the segment
    never hits that manifold, and near_miss counts gammas dipping below
    the warning band without a hit.
    """
    nbatch = u_old.shape[0]
    s_grid = np.linspace(0.0, 1.0, subpoints + 1)
    delta = u_new - u_old
    path = u_old[:, None, :] + s_grid[None, :, None] * delta[:, None, :]

    last = np.full((2, nbatch), np.nan)
    near_miss = 0
    for which, gamma in enumerate((thresholds.gamma_alpha, thresholds.gamma_beta)):
        vals = np.asarray(gamma(path), dtype=np.float64)  # (B, S+1)
        # exact-zero samples are hits at that parameter (s = 0 excluded:
        # a hit there belongs to the previous segment)
        zero_mask = vals == 0.0
        zero_mask[:, 0] = False
        zero_any = zero_mask.any(axis=1)
        zero_last = np.where(zero_any,
                             s_grid[zero_mask.shape[1] - 1 -
                                    np.argmax(zero_mask[:, ::-1], axis=1)],
                             np.nan)
        # strict sign changes between consecutive nonzero samples
        prod = vals[:, :-1] * vals[:, 1:]
        change = prod < 0.0
        change_any = change.any(axis=1)
        sign_last = np.full(nbatch, np.nan)
        rows = np.nonzero(change_any)[0]
        if rows.size:
            jlast = change.shape[1] - 1 - np.argmax(change[rows, ::-1], axis=1)
            lo = s_grid[jlast]
            hi = s_grid[jlast + 1]
            glo = vals[rows, jlast]
            for _ in range(_BISECT_ITERS):
                mid = 0.5 * (lo + hi)
                pm = u_old[rows] + mid[:, None] * delta[rows]
                gm = np.asarray(gamma(pm), dtype=np.float64)
                take_left = glo * gm <= 0.0
                hi = np.where(take_left, mid, hi)
                lo = np.where(take_left, lo, mid)
                glo = np.where(take_left, glo, gm)
            sign_last[rows] = 0.5 * (lo + hi)
        hit = np.where(np.isnan(zero_last), sign_last,
                       np.where(np.isnan(sign_last), zero_last,
                                np.maximum(zero_last, sign_last)))
        last[which] = hit
        # dip below the warning band with no hit; the s=0 sample is skipped
        # so that sitting on a manifold after a switch does not re-warn
        dips = np.abs(vals[:, 1:]).min(axis=1) < NEAR_MISS_BAND
        near_miss += int(np.count_nonzero(dips & ~zero_any & ~change_any))
    return last[0], last[1], near_miss


def _prefilter_active(thresholds, u_old, u_new, factor=16.0, band=1e-5):
    """Nodes whose segment could plausibly meet a threshold: endpoint sign
    change, or an endpoint gamma within ``factor`` times the endpoint-to-
    endpoint gamma variation (plus an absolute band) of zero.  Valid when
    gamma varies little along one segment relative to its distance from
    zero, which holds for the solver's per-step increments."""
    active = np.zeros(u_old.shape[0], dtype=bool)
    for gamma in (thresholds.gamma_alpha, thresholds.gamma_beta):
        g0 = np.asarray(gamma(u_old), dtype=np.float64)
        g1 = np.asarray(gamma(u_new), dtype=np.float64)
        reach = factor * np.abs(g1 - g0) + band
        active |= (g0 * g1 <= 0.0) | (np.minimum(np.abs(g0), np.abs(g1))
                                      <= reach)
    return active


def advance_configuration_field(thresholds: ThresholdPair, zeta: np.ndarray,
                                u_old: np.ndarray, u_new: np.ndarray,
                                subpoints: int = SCAN_SUBPOINTS,
                                tol: float = DEFAULT_TOL,
                                prefilter: bool = False):
    """Vectorized configuration update over a batch of relays.

    zeta: (B,) current configurations; u_old, u_new: (B, k).
    Returns (zeta_new, near_miss_count).  With ``prefilter`` the subpoint
    scan runs only on nodes whose endpoint gamma values make a hit
    plausible (an exact-semantics shortcut for small per-step segments).
    """
    u_old = np.asarray(u_old, dtype=np.float64)
    u_new = np.asarray(u_new, dtype=np.float64)
    thresholds.check_admissible(u_old)
    thresholds.check_admissible(u_new)
    if prefilter:
        active = _prefilter_active(thresholds, u_old, u_new)
        if not np.any(active):
            return np.array(zeta, dtype=np.int8, copy=True), 0
        idx = np.nonzero(active)[0]
        zeta_sub, near = advance_configuration_field(
            thresholds, np.asarray(zeta)[idx], u_old[idx], u_new[idx],
            subpoints, tol, prefilter=False)
        zeta_new = np.array(zeta, dtype=np.int8, copy=True)
        zeta_new[idx] = zeta_sub
        return zeta_new, near
    s_a, s_b, near_miss = _segment_last_hits(thresholds, u_old, u_new,
                                             subpoints, tol)
    both = ~np.isnan(s_a) & ~np.isnan(s_b)
    ties = both & (np.abs(s_a - s_b) <= tol)
    if np.any(ties):
        idx = int(np.nonzero(ties)[0][0])
        raise ModelError(
            f"simultaneous crossing of both threshold manifolds at segment "
            f"parameter {s_a[idx]:.15g} (relay {idx}); thresholds are not "
            f"disjoint along the trajectory")
    zeta_new = np.array(zeta, dtype=np.int8, copy=True)
    alpha_wins = ~np.isnan(s_a) & (np.isnan(s_b) | (s_a > s_b))
    beta_wins = ~np.isnan(s_b) & (np.isnan(s_a) | (s_b > s_a))
    zeta_new[alpha_wins] = 1
    zeta_new[beta_wins] = -1
    return zeta_new, near_miss


def advance_configuration(thresholds: ThresholdPair, zeta: int, u_old, u_new,
                          subpoints: int = SCAN_SUBPOINTS,
                          tol: float = DEFAULT_TOL) -> int:
    """Configuration after moving along the segment u_old -> u_new."""
    u_old = _as_point(u_old, thresholds.k)[None, :]
    u_new = _as_point(u_new, thresholds.k)[None, :]
    zeta_new, near_miss = advance_configuration_field(
        thresholds, np.array([zeta]), u_old, u_new, subpoints, tol)
    if near_miss:
        logger.warning("relay input dipped within %g of a threshold without "
                       "a sign change; treating as a near miss", NEAR_MISS_BAND)
    return int(zeta_new[0])


def evaluate_output(thresholds: ThresholdPair, branches: BranchPair, zeta: int,
                    u, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Active-branch output W_zeta(u); error if u left the branch domain."""
    u = _as_point(u, thresholds.k)
    if zeta == 1:
        gb = float(thresholds.gamma_beta(u))
        if gb < -tol:
            raise DomainError(
                f"u={u} outside the domain of branch W_+1: gamma_beta={gb:g} < 0")
    elif zeta == -1:
        ga = float(thresholds.gamma_alpha(u))
        if ga < -tol:
            raise DomainError(
                f"u={u} outside the domain of branch W_-1: gamma_alpha={ga:g} < 0")
    else:
        raise ValueError(f"zeta must be +1 or -1, got {zeta}")
    return branches.eval_branch(zeta, u)


def evaluate_output_field(thresholds: ThresholdPair, branches: BranchPair,
                          zeta: np.ndarray, u: np.ndarray,
                          tol: float = DEFAULT_TOL) -> np.ndarray:
    """Branch outputs over a batch: u (B, k), zeta (B,) -> (B, m)."""
    u = np.asarray(u, dtype=np.float64)
    nbatch = u.shape[0]
    w = np.empty((nbatch, branches.m))
    plus = zeta == 1
    if np.any(plus):
        gb = np.asarray(thresholds.gamma_beta(u[plus]), dtype=np.float64)
        if np.any(gb < -tol):
            idx = int(np.nonzero(plus)[0][np.argmin(gb)])
            raise DomainError(
                f"relay {idx}: u outside the domain of branch W_+1 "
                f"(gamma_beta={gb.min():g} < 0)")
        w[plus] = np.reshape(branches.eval_branch(1, u[plus]), (-1, branches.m))
    minus = ~plus
    if np.any(minus):
        ga = np.asarray(thresholds.gamma_alpha(u[minus]), dtype=np.float64)
        if np.any(ga < -tol):
            idx = int(np.nonzero(minus)[0][np.argmin(ga)])
            raise DomainError(
                f"relay {idx}: u outside the domain of branch W_-1 "
                f"(gamma_alpha={ga.min():g} < 0)")
        w[minus] = np.reshape(branches.eval_branch(-1, u[minus]), (-1, branches.m))
    return w


def relay_trace(thresholds: ThresholdPair, branches: BranchPair, zeta0: int,
                samples: Sequence):
    """Fold the relay over an ordered sample sequence [(t, u), ...];
    returns [(t, zeta, w), ...]."""
    out = []
    zeta = None
    u_prev = None
    t_prev = None
    for t, u in samples:
        if t_prev is not None and t < t_prev:
            raise ValueError(f"samples not ordered in t: {t} after {t_prev}")
        if zeta is None:
            zeta = init_configuration(thresholds, zeta0, u)
        else:
            zeta = advance_configuration(thresholds, zeta, u_prev, u)
        w = evaluate_output(thresholds, branches, zeta, u)
        out.append((t, zeta, w))
        u_prev = u
        t_prev = t
    return out
