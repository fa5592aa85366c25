"""Free-boundary extraction, transversality quantification and condition
validators.

The switching front b(t) is the running maximum of the root curve a(t) of
gamma_alpha along the solution profile; transversality is the spatial
derivative of gamma_alpha(u(x, t)) staying positive near the interface.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ModelError
from .grid import GridFunction
from .model import CheckResult, ModelSpec, ValidationReport, _level_set_points, \
    _sample_box
from .norms import sobolev_fractional_norm
from .relay import ThresholdPair

__all__ = [
    "FreeBoundaryTrace",
    "TransversalityReport",
    "find_root_a",
    "update_running_max",
    "check_topology",
    "check_transversality",
    "estimate_Em",
    "validate_dissipativity",
    "estimate_holder_quotient",
    "conserved_quantities",
]

DEFAULT_FLOOR = 1e-3
DEFAULT_AUDIT_CELLS = 5
EM_MAX = 10**6


@dataclass
class FreeBoundaryTrace:
    """Time series of the root curve a(t), its running max b(t) and the
    transversality margin."""

    times: list = field(default_factory=list)
    a_values: list = field(default_factory=list)
    b_values: list = field(default_factory=list)
    margins: list = field(default_factory=list)

    @property
    def b(self) -> float:
        return self.b_values[-1] if self.b_values else math.nan


def update_running_max(trace: FreeBoundaryTrace, t: float, a: float,
                       margin: float = math.nan) -> FreeBoundaryTrace:
    """Append a sample; b is the running maximum of the a-values."""
    if trace.times and t <= trace.times[-1]:
        raise ValueError(f"non-monotone time: {t} after {trace.times[-1]}")
    b = a if not trace.b_values else max(trace.b_values[-1], a)
    trace.times.append(t)
    trace.a_values.append(a)
    trace.b_values.append(b)
    trace.margins.append(margin)
    return trace


def _gamma_values(u: GridFunction, gamma) -> np.ndarray:
    return np.asarray(gamma(u.values), dtype=np.float64)


def _roots_on_nodes(x: np.ndarray, g: np.ndarray):
    """Roots of the piecewise-linear interpolant of nodal values g:
    exact-zero nodes plus strict sign changes between neighbours."""
    roots = list(x[g == 0.0])
    prod = g[:-1] * g[1:]
    for i in np.nonzero(prod < 0.0)[0]:
        roots.append(x[i] + (x[i + 1] - x[i]) * g[i] / (g[i] - g[i + 1]))
    # collapse runs of adjacent zero nodes into their endpoints only if
    # identical (duplicates are impossible: nodes are distinct)
    return sorted(roots)


def find_root_a(u: GridFunction, thresholds: ThresholdPair, b_prev: float):
    """Root of gamma_alpha(u(x)) on nodes with x >= b_prev.

    Returns (a, multiple).  No root -> a = b_prev.  One root -> located on
    the linear interpolant (well below the 1e-10 tolerance).  More than
    one root -> the leftmost, with the multiplicity flag raised.
    """
    if not (0.0 <= b_prev < 1.0):
        raise ValueError(f"b_prev must lie in [0, 1), got {b_prev}")
    x = u.grid.x
    g = _gamma_values(u, thresholds.gamma_alpha)
    mask = x >= b_prev - 1e-15
    roots = _roots_on_nodes(x[mask], g[mask])
    if not roots:
        return b_prev, False
    if len(roots) == 1:
        return float(roots[0]), False
    return float(roots[0]), True


def check_topology(xi: np.ndarray):
    """True iff xi is +1 on a prefix and -1 on the suffix.

    Returns (ok, j) with j the index of the last +1 node (j = -1 when all
    nodes are -1, j = n when all are +1: degenerate edge interfaces)."""
    xi = np.asarray(xi)
    minus = np.nonzero(xi == -1)[0]
    plus = np.nonzero(xi == 1)[0]
    if minus.size + plus.size != xi.size:
        return False, None
    if minus.size == 0:
        return True, xi.size - 1
    if plus.size == 0:
        return True, -1
    j = int(plus.max())
    if j < int(minus.min()):
        return True, j
    return False, None


@dataclass
class TransversalityReport:
    is_transverse: bool
    margin: float
    window: tuple
    em_index: Optional[float] = None
    multiple_roots: bool = False

    def to_dict(self):
        em = self.em_index
        if em is not None and math.isinf(em):
            em = "inf"
        margin = float(self.margin)
        return {"is_transverse": bool(self.is_transverse),
                "margin": "inf" if math.isinf(margin) else margin,
                "window": [float(self.window[0]), float(self.window[1])],
                "em_index": em,
                "multiple_roots": bool(self.multiple_roots)}


def directional_derivative(u: GridFunction, thresholds: ThresholdPair) -> np.ndarray:
    """d/dx gamma_alpha(u(x)) = grad gamma_alpha(u) . u_x on the nodes,
    with u_x by central differences (one-sided at the boundary)."""
    if thresholds.grad_alpha is None:
        raise ValueError("thresholds carry no gradient for gamma_alpha")
    ux = np.gradient(u.values, u.grid.h, axis=0, edge_order=2)
    grad = np.asarray(thresholds.grad_alpha(u.values), dtype=np.float64)
    return np.einsum("ic,ic->i", grad, ux)


def check_transversality(state, thresholds: ThresholdPair,
                         window_halfwidth: Optional[float] = None,
                         floor: float = DEFAULT_FLOOR,
                         band: float = math.inf,
                         em_index: Optional[float] = None) -> TransversalityReport:
    """Minimal directional derivative of gamma_alpha along the profile on
    audit nodes near the interface.

    Audit nodes lie within the window around the interface and carry
    gamma_alpha(u) in [0, band]; if no node qualifies, every node in the
    window is audited.  ``state`` needs attributes u (GridFunction) and
    xi (configuration field)."""
    u: GridFunction = state.u
    xi = np.asarray(state.xi)
    ok, j = check_topology(xi)
    if not ok:
        raise ValueError("state does not have single-interface topology")
    x = u.grid.x
    h = u.grid.h
    if window_halfwidth is None:
        window_halfwidth = DEFAULT_AUDIT_CELLS * h
    g = _gamma_values(u, thresholds.gamma_alpha)
    # interface location: root of the interpolant in the cell straddling
    # the configuration jump, else the last +1 node
    if 0 <= j < len(x) - 1 and g[j] * g[j + 1] < 0.0:
        x_b = x[j] + h * g[j] / (g[j] - g[j + 1])
    else:
        x_b = x[min(max(j, 0), len(x) - 1)]
    lo, hi = x_b - window_halfwidth, x_b + window_halfwidth
    in_window = (x >= lo) & (x <= hi)
    roots = _roots_on_nodes(x[in_window], g[in_window])
    if not roots:
        # the profile stays clear of Gamma_alpha near the interface, so the
        # relay cannot switch there: transversality holds vacuously
        return TransversalityReport(is_transverse=True, margin=math.inf,
                                    window=(lo, hi), em_index=em_index,
                                    multiple_roots=False)
    eligible = in_window & (g >= 0.0) & (g <= band)
    if not np.any(eligible):
        eligible = in_window & (g >= 0.0)
    if not np.any(eligible):
        eligible = in_window
    deriv = directional_derivative(u, thresholds)
    margin = float(deriv[eligible].min())
    multiple = len(roots) > 1
    return TransversalityReport(
        is_transverse=bool(margin >= floor and not multiple),
        margin=margin, window=(lo, hi), em_index=em_index,
        multiple_roots=multiple)


# --------------------------------------------------------------------------
# E_m quantification of the initial data


def _em_clauses(b_bar, x, gb, ga, slope, norm_phi, sup_psi, m: int) -> bool:
    inv_m = 1.0 / m
    inv_m2 = inv_m * inv_m
    if not (inv_m <= b_bar <= 1.0 - inv_m):
        return False
    left = x <= b_bar
    if np.any(gb[left] < inv_m2):
        return False
    far = x >= b_bar + inv_m
    if np.any(ga[far] < inv_m2):
        return False
    win = (x >= b_bar) & (x <= b_bar + inv_m)
    low = win & (ga >= 0.0) & (ga <= inv_m2)
    if np.any(slope[low] < inv_m):
        return False
    return norm_phi <= m and sup_psi <= m


def estimate_Em(init, model: ModelSpec, q: float = 4.0,
                m_max: int = EM_MAX):
    """Smallest m such that the five quantified-transversality clauses hold
    for the data (phi, psi, b_bar) in discrete form; math.inf if none up to
    m_max works.

    ``init`` needs attributes phi (GridFunction, k components), psi
    (GridFunction, l components) and b_bar.  The norm clause uses the
    discrete fractional Sobolev surrogate at the data's own grid.
    """
    phi: GridFunction = init.phi
    psi: GridFunction = init.psi
    b_bar = float(init.b_bar)
    thr = model.thresholds
    x = phi.grid.x
    gb = _gamma_values(phi, thr.gamma_beta)
    ga = _gamma_values(phi, thr.gamma_alpha)
    slope = directional_derivative(phi, thr)
    norm_phi = sobolev_fractional_norm(phi, 2.0 - 2.0 / q, q)
    sup_psi = float(np.sqrt(np.einsum("ic,ic->i", psi.values,
                                      psi.values)).max())

    if b_bar <= 0.0 or b_bar >= 1.0:
        return math.inf
    lower = 2
    lower = max(lower, math.ceil(1.0 / b_bar - 1e-12))
    lower = max(lower, math.ceil(1.0 / (1.0 - b_bar) - 1e-12))
    min_gb = float(gb[x <= b_bar].min()) if np.any(x <= b_bar) else math.inf
    if min_gb <= 0.0:
        return math.inf
    lower = max(lower, math.ceil(1.0 / math.sqrt(min_gb) - 1e-12))
    lower = max(lower, math.ceil(max(norm_phi, sup_psi) - 1e-12))
    if lower > m_max:
        return math.inf

    # The clause truth values change only where a node crosses one of its
    # per-node thresholds: entering the far region / leaving the interface
    # window (1/(x_i - b_bar)), leaving the low-gamma band (1/sqrt(ga_i)),
    # or satisfying the slope bound (1/slope_i).  Checking the combined
    # lower bound plus every such threshold (+-1 for ceil edges) therefore
    # finds the exact minimum.
    candidates = {lower}

    def _add(value):
        m = math.ceil(value - 1e-12)
        candidates.add(max(lower, m))
        candidates.add(max(lower, m + 1))

    near = x >= b_bar - 1e-15
    for xi_pos, gai, sl in zip(x[near], ga[near], slope[near]):
        if xi_pos > b_bar:
            _add(1.0 / (xi_pos - b_bar))
        if gai > 0.0:
            _add(1.0 / math.sqrt(gai))
        if sl > 0.0:
            _add(1.0 / sl)
    for m in sorted(candidates):
        if m > m_max:
            break
        if _em_clauses(b_bar, x, gb, ga, slope, norm_phi, sup_psi, m):
            return int(m)
    return math.inf


# --------------------------------------------------------------------------
# dissipativity and branch-quotient validators


def validate_dissipativity(model: ModelSpec, u_box=None, v_box=None,
                           sample_count: int = 256, seed: int = 0,
                           eps_in: float = 0.0) -> ValidationReport:
    """Sampled invariant-box evidence.

    (a) On every face of the u box intersected with a branch domain, the
    reaction vector must point strictly inside; the minimal inward
    component per face/branch is reported (0 = non-strict, < 0 = outward).
    (b) Envelope fit |g| <= A |v| + B over box samples as the blow-up
    heuristic; A, B and the fit residual are reported."""
    u_box = np.asarray(u_box if u_box is not None else model.u_box, dtype=float) \
        if (u_box is not None or model.u_box is not None) else None
    v_box = np.asarray(v_box if v_box is not None else model.v_box, dtype=float) \
        if (v_box is not None or model.v_box is not None) else None
    if u_box is None or v_box is None:
        raise ValueError("validate_dissipativity requires declared u and v boxes")
    thr = model.thresholds
    checks = []
    overall_min = math.inf
    for comp in range(model.k):
        for side, label in ((0, "lo"), (1, "hi")):
            pts = _sample_box(np.concatenate([u_box, v_box]), sample_count,
                              seed + comp * 2 + side)
            upts = pts[:, :model.k].copy()
            vpts = pts[:, model.k:]
            upts[:, comp] = u_box[comp, side]
            if model.u_lower is not None:
                keep = np.all(upts >= model.u_lower - 1e-15, axis=1)
                upts, vpts = upts[keep], vpts[keep]
            for zeta, dom, branch in ((1, thr.gamma_beta, model.branches.w_plus),
                                      (-1, thr.gamma_alpha,
                                       model.branches.w_minus)):
                if upts.shape[0] == 0:
                    checks.append(CheckResult(
                        f"face_u{comp + 1}_{label}_W{zeta:+d}", "skip",
                        {"reason": "no admissible samples on this face"}))
                    continue
                mask = np.asarray(dom(upts), dtype=np.float64) >= 0.0
                if not np.any(mask):
                    checks.append(CheckResult(
                        f"face_u{comp + 1}_{label}_W{zeta:+d}", "skip",
                        {"reason": "face outside the branch domain"}))
                    continue
                uu, vv = upts[mask], vpts[mask]
                ww = np.reshape(branch(uu), (-1, model.m))
                f = model.eval_f(uu, vv, ww)
                inward = f[:, comp] if side == 0 else -f[:, comp]
                margin = float(inward.min())
                overall_min = min(overall_min, margin)
                status = "pass" if margin > eps_in else \
                    ("warn" if margin >= -1e-12 else "fail")
                checks.append(CheckResult(
                    f"face_u{comp + 1}_{label}_W{zeta:+d}", status,
                    {"min_inward_component": margin,
                     "strict": bool(margin > eps_in),
                     "samples": int(uu.shape[0])}))

    # (b) growth-bound envelope fit
    wbox = model.w_range(seed=seed)
    full = np.concatenate([u_box, v_box, wbox])
    pts = _sample_box(full, sample_count, seed + 101)
    uu = pts[:, :model.k]
    if model.u_lower is not None:
        uu = np.maximum(uu, model.u_lower)
    vv = pts[:, model.k:model.k + model.l]
    ww = pts[:, model.k + model.l:]
    gvals = model.eval_g(uu, vv, ww)
    gmag = np.sqrt(np.sum(gvals**2, axis=1))
    vmag = np.sqrt(np.sum(vv**2, axis=1))
    sizeable = vmag > 1e-9
    a_fit = float(np.max(gmag[sizeable] / vmag[sizeable])) if np.any(sizeable) \
        else 0.0
    b_fit = float(max(0.0, np.max(gmag - a_fit * vmag)))
    residual = float(np.sqrt(np.mean((a_fit * vmag + b_fit - gmag) ** 2)))
    checks.append(CheckResult("growth_bound", "pass",
                              {"A": a_fit, "B": b_fit, "residual": residual}))
    checks.append(CheckResult("summary", "pass" if overall_min > eps_in else
                              ("warn" if overall_min >= -1e-12 else "fail"),
                              {"min_inward_margin": overall_min
                               if math.isfinite(overall_min) else "inf"}))
    return ValidationReport(checks)


def estimate_holder_quotient(model: ModelSpec, which: int, sigma: float,
                             n_pairs: int = 2000, seed: int = 0,
                             near_scale: float = 1e-3) -> float:
    """Empirical constant of the weighted Hölder bound for a branch.

    For the +1 branch the weight is gamma_beta, for the -1 branch
    gamma_alpha: K = sup |W(u) - W(u')| (gamma(u)^sigma + gamma(u')^sigma)
    / |u - u'|.  Half the pairs are drawn within ``near_scale`` of the
    gamma = 0 set where the bound is critical; shrinking ``near_scale``
    densifies the sampling toward the manifold, which makes K grow without
    bound exactly when the weighted bound fails.  With sigma = 0 the weight
    factor is exactly 2, so the raw supremum is halved to keep K an
    empirical Lipschitz constant."""
    if not (0.0 <= sigma < 1.0):
        raise ValueError(f"sigma must lie in [0, 1), got {sigma}")
    if which not in (1, -1):
        raise ValueError("which must be +1 or -1")
    thr = model.thresholds
    gamma = thr.gamma_beta if which == 1 else thr.gamma_alpha
    grad = thr.grad_beta if which == 1 else thr.grad_alpha
    branch = model.branches.w_plus if which == 1 else model.branches.w_minus
    box = model._sampling_u_box()
    if model.u_lower is not None:
        box = box.copy()
        box[:, 0] = np.maximum(box[:, 0], model.u_lower)
    rng = np.random.default_rng(seed)

    half = n_pairs // 2
    bulk = _sample_box(box, 4 * half, seed)
    gvals = np.asarray(gamma(bulk), dtype=np.float64)
    bulk = bulk[gvals >= 0.0]
    pairs_a = [bulk[: bulk.shape[0] // 2]]
    pairs_b = [bulk[bulk.shape[0] // 2: 2 * (bulk.shape[0] // 2)]]

    on_gamma = _level_set_points(gamma, box, max(half, 64), seed + 7)
    if on_gamma.shape[0]:
        reps = int(np.ceil(half / on_gamma.shape[0]))
        base = np.tile(on_gamma, (reps, 1))[:half]
        gr = np.asarray(grad(base), dtype=np.float64)
        gr /= np.linalg.norm(gr, axis=1, keepdims=True)
        d1 = rng.uniform(0.0, near_scale, size=(half, 1))
        d2 = rng.uniform(0.0, near_scale, size=(half, 1))
        near_a = base + d1 * gr
        near_b = base + d2 * gr
        ok = (np.asarray(gamma(near_a), dtype=np.float64) >= 0.0) & \
             (np.asarray(gamma(near_b), dtype=np.float64) >= 0.0)
        if model.u_lower is not None:
            ok &= np.all(near_a >= model.u_lower, axis=1)
            ok &= np.all(near_b >= model.u_lower, axis=1)
        pairs_a.append(near_a[ok])
        pairs_b.append(near_b[ok])
    ua = np.concatenate(pairs_a)
    ub = np.concatenate(pairs_b)
    if ua.shape[0] == 0:
        raise ModelError("no admissible sample pairs in the branch domain")
    wa = np.reshape(branch(ua), (-1, model.m))
    wb = np.reshape(branch(ub), (-1, model.m))
    dw = np.sqrt(np.sum((wa - wb) ** 2, axis=1))
    du = np.sqrt(np.sum((ua - ub) ** 2, axis=1))
    good = du > 1e-14
    gama = np.asarray(gamma(ua), dtype=np.float64)
    gamb = np.asarray(gamma(ub), dtype=np.float64)
    weight = np.power(np.maximum(gama, 0.0), sigma) + \
        np.power(np.maximum(gamb, 0.0), sigma)
    raw = float(np.max(dw[good] * weight[good] / du[good])) if np.any(good) \
        else 0.0
    return raw / 2.0 if sigma == 0.0 else raw


def conserved_quantities(state, model: ModelSpec, combos) -> list:
    """Trapezoid integrals of linear combinations sum(cu . u + cv . v)."""
    u: GridFunction = state.u
    v: GridFunction = state.v
    w = u.grid.trapezoid_weights()
    out = []
    for cu, cv in combos:
        cu = np.asarray(cu, dtype=np.float64)
        cv = np.asarray(cv, dtype=np.float64)
        if cu.shape != (model.k,) or cv.shape != (model.l,):
            raise ValueError(
                f"combo dimensions {cu.shape}/{cv.shape} do not match "
                f"k={model.k}, l={model.l}")
        density = u.values @ cu + v.values @ cv
        out.append(float(np.sum(w * density)))
    return out
