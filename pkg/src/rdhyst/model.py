"""Model definition: dimensions, reaction terms, thresholds, branches.

A ModelSpec owns parsed expressions for the reaction vector f (diffusing
components), the node-local vector g, the two threshold functions and the
two output branches, plus optional invariant boxes and admissibility
bounds.  Compiled vectorized callables are built lazily and cached.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import ModelError, ScenarioError
from .expressions import Expression, eval_expression, grad_expression, parse_expression
from .relay import BranchPair, ThresholdPair
from .textconfig import format_sections, parse_sections, read_sections

__all__ = [
    "ModelSpec",
    "make_model",
    "builtin_bacteria_model",
    "validate_model",
    "ValidationReport",
    "load_model",
    "parse_model_text",
    "dump_model",
    "halton",
]

BUILTIN_BACTERIA_DEFAULTS = {
    "D1": 0.005, "D2": 0.0025,
    "a": 1.0, "a1": 1.0, "a2": 1.0,
    "a_alpha": 1.0, "b_alpha": 1.0,
    "a_beta": 0.5, "b_beta": 0.5,
    "lambda": 1.0,
}
BACTERIA_U2_MIN = 1e-6
_BACTERIA_BOX = {"u1_max": 5.0, "u2_max": 5.0, "v_max": 10.0}


def _names(prefix: str, count: int):
    return tuple(f"{prefix}{i + 1}" for i in range(count))


@dataclass
class ModelSpec:
    """Complete problem definition. Expression variable conventions:
    f, g use u1..uk, v1..vl, w1..wm; thresholds and branches use u1..uk."""

    k: int
    l: int
    m: int
    diffusion: np.ndarray
    f_exprs: tuple
    g_exprs: tuple
    gamma_alpha: Expression
    gamma_beta: Expression
    w_plus_exprs: tuple
    w_minus_exprs: tuple
    constants: dict = field(default_factory=dict)
    u_box: Optional[np.ndarray] = None   # (k, 2) invariant box
    v_box: Optional[np.ndarray] = None   # (l, 2)
    u_lower: Optional[np.ndarray] = None  # admissible floor, (k,)
    u_upper: Optional[np.ndarray] = None
    conserved_combos: tuple = ()          # ((cu, cv), ...) coefficient pairs
    name: str = "custom"

    def __post_init__(self):
        if min(self.k, self.l, self.m) < 1:
            raise ModelError("dimensions k, l, m must be positive")
        self.diffusion = np.asarray(self.diffusion, dtype=np.float64)
        if self.diffusion.shape != (self.k,):
            raise ModelError(f"need {self.k} diffusion coefficients")
        if np.any(self.diffusion <= 0.0):
            raise ModelError("diffusion coefficients must be strictly positive")
        if len(self.f_exprs) != self.k or len(self.g_exprs) != self.l:
            raise ModelError("component counts of f/g must match k/l")
        if len(self.w_plus_exprs) != self.m or len(self.w_minus_exprs) != self.m:
            raise ModelError("branch component counts must match m")
        for attr in ("u_box", "v_box", "u_lower", "u_upper"):
            val = getattr(self, attr)
            if val is not None:
                setattr(self, attr, np.asarray(val, dtype=np.float64))

    @property
    def u_names(self):
        return _names("u", self.k)

    @property
    def v_names(self):
        return _names("v", self.l)

    @property
    def w_names(self):
        return _names("w", self.m)

    def _u_env(self, u: np.ndarray):
        return {name: u[..., i] for i, name in enumerate(self.u_names)}

    def _stacked(self, exprs, env, shape):
        out = np.empty(shape + (len(exprs),))
        for j, e in enumerate(exprs):
            out[..., j] = eval_expression(e, env)
        return out

    @cached_property
    def thresholds(self) -> ThresholdPair:
        grads_a = grad_expression(self.gamma_alpha, self.u_names)
        grads_b = grad_expression(self.gamma_beta, self.u_names)

        def _gamma(expr):
            def fn(u):
                return eval_expression(expr, self._u_env(np.asarray(u)))
            return fn

        def _grad(grads):
            def fn(u):
                u = np.asarray(u)
                return self._stacked(grads, self._u_env(u), u.shape[:-1])
            return fn

        return ThresholdPair(gamma_alpha=_gamma(self.gamma_alpha),
                             gamma_beta=_gamma(self.gamma_beta),
                             grad_alpha=_grad(grads_a),
                             grad_beta=_grad(grads_b),
                             k=self.k,
                             lower=self.u_lower,
                             upper=self.u_upper)

    @cached_property
    def branches(self) -> BranchPair:
        def _branch(exprs):
            def fn(u):
                u = np.asarray(u)
                return self._stacked(exprs, self._u_env(u), u.shape[:-1])
            return fn

        return BranchPair(w_plus=_branch(self.w_plus_exprs),
                          w_minus=_branch(self.w_minus_exprs),
                          m=self.m)

    def _uvw_env(self, u, v, w):
        env = self._u_env(np.asarray(u))
        v = np.asarray(v)
        w = np.asarray(w)
        env.update({name: v[..., i] for i, name in enumerate(self.v_names)})
        env.update({name: w[..., i] for i, name in enumerate(self.w_names)})
        return env

    def eval_f(self, u, v, w) -> np.ndarray:
        """Reaction vector for the diffusing components, shape (..., k)."""
        u = np.asarray(u)
        return self._stacked(self.f_exprs, self._uvw_env(u, v, w), u.shape[:-1])

    def eval_g(self, u, v, w) -> np.ndarray:
        """Right-hand side of the non-diffusing components, shape (..., l)."""
        u = np.asarray(u)
        return self._stacked(self.g_exprs, self._uvw_env(u, v, w), u.shape[:-1])

    def w_range(self, samples: int = 512, seed: int = 0) -> np.ndarray:
        """Bounding box (m, 2) of both branch images over the u box."""
        pts = _sample_box(self._sampling_u_box(), samples, seed)
        lo = np.full(self.m, np.inf)
        hi = np.full(self.m, -np.inf)
        thr = self.thresholds
        for fn, dom in ((self.branches.w_plus, thr.gamma_beta),
                        (self.branches.w_minus, thr.gamma_alpha)):
            mask = np.asarray(dom(pts)) >= 0.0
            if not np.any(mask):
                continue
            w = np.reshape(fn(pts[mask]), (-1, self.m))
            lo = np.minimum(lo, w.min(axis=0))
            hi = np.maximum(hi, w.max(axis=0))
        if not np.all(np.isfinite(lo)):
            raise ModelError("could not sample the branch image: no sampled "
                             "point lies in either branch domain")
        return np.stack([lo, hi], axis=1)

    def _sampling_u_box(self) -> np.ndarray:
        if self.u_box is not None:
            return self.u_box
        lo = np.where(np.isfinite(self.u_lower), self.u_lower, 0.0) \
            if self.u_lower is not None else np.zeros(self.k)
        return np.stack([lo, lo + 5.0], axis=1)


def _parse_exprs(strings, variables, constants, what):
    out = []
    for j, text in enumerate(strings):
        try:
            out.append(parse_expression(text, variables, constants))
        except Exception as exc:
            raise ModelError(f"{what}[{j + 1}]: {exc}") from exc
    return tuple(out)


def make_model(k, l, m, diffusion, f, g, gamma_alpha, gamma_beta, w_plus,
               w_minus, constants=None, **kwargs) -> ModelSpec:
    """Build a ModelSpec from expression strings, enforcing the per-role
    variable sets (f, g over u,v,w; thresholds and branches over u)."""
    constants = dict(constants or {})
    uvw = _names("u", k) + _names("v", l) + _names("w", m)
    uonly = _names("u", k)
    return ModelSpec(
        k=k, l=l, m=m, diffusion=np.asarray(diffusion, dtype=np.float64),
        f_exprs=_parse_exprs(f, uvw, constants, "f"),
        g_exprs=_parse_exprs(g, uvw, constants, "g"),
        gamma_alpha=_parse_exprs([gamma_alpha], uonly, constants, "gamma_alpha")[0],
        gamma_beta=_parse_exprs([gamma_beta], uonly, constants, "gamma_beta")[0],
        w_plus_exprs=_parse_exprs(w_plus, uonly, constants, "w_plus"),
        w_minus_exprs=_parse_exprs(w_minus, uonly, constants, "w_minus"),
        constants=constants, **kwargs)


def builtin_bacteria_model(params: Optional[dict] = None) -> ModelSpec:
    """Colony-growth model: two diffusing fields (buffer u1, nutrient u2),
    one non-diffusing density v, relay-controlled growth rate.

    Thresholds are the hyperbolas u1 = a_alpha/u2 + b_alpha (switch on) and
    u1 = a_beta/u2 + b_beta (switch off); the active branch is the constant
    ``lambda``, the inactive branch is 0.  Requires a_alpha > a_beta and
    b_alpha > b_beta so the thresholds are disjoint for u2 > 0.
    """
    p = dict(BUILTIN_BACTERIA_DEFAULTS)
    box = dict(_BACTERIA_BOX)
    u2_min = BACTERIA_U2_MIN
    if params:
        for key, val in params.items():
            if key in box:
                box[key] = float(val)
            elif key == "u2_min":
                u2_min = float(val)
            elif key in p:
                p[key] = float(val)
            else:
                raise ModelError(f"unknown bacteria parameter {key!r}")
    for key, val in p.items():
        if val <= 0.0:
            raise ModelError(f"bacteria parameter {key} must be > 0, got {val}")
    if not (p["a_alpha"] > p["a_beta"] and p["b_alpha"] > p["b_beta"]):
        raise ModelError(
            "threshold ordering requires a_alpha > a_beta and b_alpha > b_beta "
            f"(got a_alpha={p['a_alpha']}, a_beta={p['a_beta']}, "
            f"b_alpha={p['b_alpha']}, b_beta={p['b_beta']})")
    combos = (
        (np.array([1.0, 0.0]), np.array([p["a1"] / p["a"]])),
        (np.array([0.0, 1.0]), np.array([p["a2"] / p["a"]])),
    )
    return make_model(
        k=2, l=1, m=1,
        diffusion=[p["D1"], p["D2"]],
        f=["-a1*w1*v1", "-a2*w1*v1"],
        g=["a*w1*v1"],
        gamma_alpha="-u1 + a_alpha/u2 + b_alpha",
        gamma_beta="u1 - a_beta/u2 - b_beta",
        w_plus=["lambda"],
        w_minus=["0"],
        constants=p,
        u_box=np.array([[0.0, box["u1_max"]], [u2_min, box["u2_max"]]]),
        v_box=np.array([[0.0, box["v_max"]]]),
        u_lower=np.array([0.0, u2_min]),
        conserved_combos=combos,
        name="bacteria",
    )


# --------------------------------------------------------------------------
# validation


def halton(count: int, dim: int, start: int = 1) -> np.ndarray:
    """Quasi-random points in [0,1)^dim (radical-inverse / Halton)."""
    primes = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]
    if dim > len(primes):
        raise ValueError(f"halton supports up to {len(primes)} dimensions")
    out = np.empty((count, dim))
    for d in range(dim):
        base = primes[d]
        for i in range(count):
            n = start + i
            inv = 0.0
            denom = 1.0
            while n > 0:
                denom *= base
                n, rem = divmod(n, base)
                inv += rem / denom
            out[i, d] = inv
    return out


def _sample_box(box: np.ndarray, count: int, seed: int = 0) -> np.ndarray:
    pts01 = halton(count, box.shape[0], start=1 + seed * count)
    return box[:, 0] + pts01 * (box[:, 1] - box[:, 0])


@dataclass
class CheckResult:
    name: str
    status: str  # pass | warn | fail | skip
    details: dict = field(default_factory=dict)


@dataclass
class ValidationReport:
    checks: list

    @property
    def status(self) -> str:
        order = {"pass": 0, "skip": 1, "warn": 2, "fail": 3}
        worst = max(self.checks, key=lambda c: order[c.status])
        return worst.status

    def ok(self) -> bool:
        return all(c.status in ("pass", "skip") for c in self.checks)

    def to_json(self) -> str:
        payload = {"status": self.status,
                   "checks": [{"name": c.name, "status": c.status,
                               "details": _jsonable(c.details)}
                              for c in self.checks]}
        return json.dumps(payload, indent=2, sort_keys=True)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        val = float(obj)
        if np.isinf(val):
            return "inf" if val > 0 else "-inf"
        return val
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _level_set_points(gamma, box, count, seed):
    """Points on {gamma = 0} found by bisecting sign changes along random
    segments between quasi-random box samples."""
    ends = _sample_box(box, 2 * count + 2, seed)
    a_pts = ends[0::2]
    b_pts = ends[1::2]
    va = np.asarray(gamma(a_pts), dtype=np.float64)
    vb = np.asarray(gamma(b_pts), dtype=np.float64)
    rows = np.nonzero(va * vb < 0.0)[0]
    if rows.size == 0:
        return np.empty((0, box.shape[0]))
    lo = np.zeros(rows.size)
    hi = np.ones(rows.size)
    glo = va[rows]
    seg_a = a_pts[rows]
    seg_d = b_pts[rows] - a_pts[rows]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        gm = np.asarray(gamma(seg_a + mid[:, None] * seg_d), dtype=np.float64)
        left = glo * gm <= 0.0
        hi = np.where(left, mid, hi)
        lo = np.where(left, lo, mid)
        glo = np.where(left, glo, gm)
    s = 0.5 * (lo + hi)
    return seg_a + s[:, None] * seg_d


def _pair_quotients(fn, pts_a, pts_b):
    fa = np.reshape(fn(pts_a), (pts_a.shape[0], -1))
    fb = np.reshape(fn(pts_b), (pts_b.shape[0], -1))
    num = np.sqrt(np.sum((fa - fb) ** 2, axis=1))
    den = np.sqrt(np.sum((pts_a - pts_b) ** 2, axis=1))
    good = den > 0
    return num[good] / den[good]


def validate_model(spec: ModelSpec, sample_count: int = 256,
                   seed: int = 0) -> ValidationReport:
    """Sampled consistency checks: threshold disjointness and gradient
    nonvanishing on the zero level sets, empirical Lipschitz quotients of
    f, g and the branches, and dimension/arity consistency.  Failures are
    report entries, not exceptions."""
    checks = []
    thr = spec.thresholds
    box = spec._sampling_u_box()
    if spec.u_lower is not None:
        box = box.copy()
        box[:, 0] = np.maximum(box[:, 0], spec.u_lower)

    # (d) dimension / arity consistency (construction already enforces most)
    checks.append(CheckResult("dimensions", "pass", {
        "k": spec.k, "l": spec.l, "m": spec.m,
        "diffusion": list(map(float, spec.diffusion))}))

    # (a) + (b): level-set sampling
    for label, gamma, other, grad in (
            ("gamma_alpha", thr.gamma_alpha, thr.gamma_beta, thr.grad_alpha),
            ("gamma_beta", thr.gamma_beta, thr.gamma_alpha, thr.grad_beta)):
        pts = _level_set_points(gamma, box, sample_count, seed)
        if pts.shape[0] == 0:
            checks.append(CheckResult(f"disjointness_{label}", "skip",
                                      {"reason": "zero level set not met in "
                                                 "sampling box"}))
            checks.append(CheckResult(f"gradient_{label}", "skip",
                                      {"reason": "no level-set points"}))
            continue
        margin = float(np.min(np.asarray(other(pts), dtype=np.float64)))
        status = "pass" if margin > 0.0 else "fail"
        checks.append(CheckResult(f"disjointness_{label}", status,
                                  {"points": int(pts.shape[0]),
                                   "min_other_gamma": margin}))
        gnorm = float(np.min(np.sqrt(np.sum(np.asarray(grad(pts)) ** 2, axis=-1))))
        checks.append(CheckResult(f"gradient_{label}",
                                  "pass" if gnorm > 1e-8 else "fail",
                                  {"min_gradient_norm": gnorm}))

    # (c) empirical Lipschitz quotients on declared boxes
    if spec.v_box is None:
        checks.append(CheckResult("lipschitz", "skip",
                                  {"reason": "no v box declared"}))
    else:
        wbox = spec.w_range(seed=seed)
        full = np.concatenate([box, spec.v_box, wbox], axis=0)
        pts = _sample_box(full, sample_count, seed)
        rng = np.random.default_rng(seed)
        quots = {}
        worst = "pass"

        def _split(arr):
            return (arr[:, :spec.k], arr[:, spec.k:spec.k + spec.l],
                    arr[:, spec.k + spec.l:])

        def _pairs_at(scale):
            direction = rng.standard_normal(pts.shape)
            direction /= np.linalg.norm(direction, axis=1, keepdims=True)
            other = pts + scale * direction * (full[:, 1] - full[:, 0])
            other = np.clip(other, full[:, 0], full[:, 1])
            a_list, b_list = [pts], [other]
            # face probes: each point snapped near a face, paired with its
            # projection onto that face, exposes derivative blow-up there
            width = full[:, 1] - full[:, 0]
            for dim in range(full.shape[0]):
                for side in (0, 1):
                    edge = pts[:32].copy()
                    face = full[dim, side]
                    delta = 0.5 * scale * width[dim]
                    edge[:, dim] = face + delta if side == 0 else face - delta
                    proj = edge.copy()
                    proj[:, dim] = face
                    a_list.append(edge)
                    b_list.append(proj)
            return np.concatenate(a_list), np.concatenate(b_list)

        for scale_label, scale in (("coarse", 0.5), ("fine", 1.0 / 128.0)):
            pa, pb = _pairs_at(scale)
            fa = spec.eval_f(*_split(pa))
            fb = spec.eval_f(*_split(pb))
            ga = spec.eval_g(*_split(pa))
            gb = spec.eval_g(*_split(pb))
            den = np.sqrt(np.sum((pa - pb) ** 2, axis=1))
            good = den > 0
            quots.setdefault("f", {})[scale_label] = float(np.max(
                np.sqrt(np.sum((fa - fb) ** 2, axis=1))[good] / den[good]))
            quots.setdefault("g", {})[scale_label] = float(np.max(
                np.sqrt(np.sum((ga - gb) ** 2, axis=1))[good] / den[good]))
        for label, branch, dom in (("w_plus", spec.branches.w_plus,
                                    thr.gamma_beta),
                                   ("w_minus", spec.branches.w_minus,
                                    thr.gamma_alpha)):
            upts = _sample_box(box, sample_count, seed + 1)
            mask = np.asarray(dom(upts)) >= 0.0
            upts = upts[mask]
            if upts.shape[0] < 2:
                quots[label] = {"coarse": 0.0, "fine": 0.0}
                continue
            for scale_label, scale in (("coarse", 0.5), ("fine", 1.0 / 128.0)):
                dirn = rng.standard_normal(upts.shape)
                dirn /= np.linalg.norm(dirn, axis=1, keepdims=True)
                opts = np.clip(upts + scale * dirn * (box[:, 1] - box[:, 0]),
                               box[:, 0], box[:, 1])
                inside = np.asarray(dom(opts)) >= 0.0
                if not np.any(inside):
                    quots.setdefault(label, {})[scale_label] = 0.0
                    continue
                q = _pair_quotients(branch, upts[inside], opts[inside])
                quots.setdefault(label, {})[scale_label] = \
                    float(q.max()) if q.size else 0.0
        growth = {}
        for label, pair in quots.items():
            coarse = pair.get("coarse", 0.0)
            fine = pair.get("fine", 0.0)
            growth[label] = fine / coarse if coarse > 0 else 1.0
            if coarse > 0 and fine / coarse > 4.0:
                worst = "warn"
        checks.append(CheckResult("lipschitz", worst,
                                  {"quotients": quots, "fine_over_coarse": growth,
                                   "note": "growth > 4x between scales suggests "
                                           "an unbounded derivative"}))
    return ValidationReport(checks)


# --------------------------------------------------------------------------
# model file format


def _floats(text: str):
    return [float(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]


def _box_from(text: str, count: int, what: str):
    rows = [r for r in text.split(";") if r.strip()]
    if len(rows) != count:
        raise ScenarioError(f"{what}: expected {count} 'lo, hi' pairs, got "
                            f"{len(rows)}")
    out = np.empty((count, 2))
    for i, row in enumerate(rows):
        vals = [float(tok) for tok in row.split(",") if tok.strip()]
        if len(vals) != 2:
            raise ScenarioError(f"{what}: row {i + 1} must be 'lo, hi'")
        out[i] = vals
    return out


def parse_model_text(text: str, filename: str = "<model>") -> ModelSpec:
    sections = parse_sections(text, filename)

    def need(section):
        if section not in sections:
            raise ScenarioError(f"{filename}: missing section [{section}]")
        return {k: v for k, (v, _) in sections[section].items()}

    dims = need("dimensions")
    try:
        k = int(dims["k"])
        l = int(dims["l"])
        m = int(dims["m"])
    except KeyError as exc:
        raise ScenarioError(f"{filename}: [dimensions] needs k, l, m "
                            f"(missing {exc})") from None
    constants = {}
    if "constants" in sections:
        constants = {key: float(val)
                     for key, (val, _) in sections["constants"].items()}
    diff_sec = need("diffusion")
    try:
        diffusion = [float(diff_sec[f"D{i + 1}"]) for i in range(k)]
    except KeyError as exc:
        raise ScenarioError(f"{filename}: [diffusion] missing {exc}") from None
    reaction = need("reaction")
    ode = need("ode")
    thresholds = need("thresholds")
    branches = need("branches")
    try:
        f = [reaction[f"f{i + 1}"] for i in range(k)]
        g = [ode[f"g{i + 1}"] for i in range(l)]
        ga = thresholds["gamma_alpha"]
        gb = thresholds["gamma_beta"]
        wp = [branches[f"w_plus{i + 1}"] for i in range(m)]
        wm = [branches[f"w_minus{i + 1}"] for i in range(m)]
    except KeyError as exc:
        raise ScenarioError(f"{filename}: missing entry {exc}") from None

    kwargs = {}
    if "admissible" in sections:
        adm = {k2: v for k2, (v, _) in sections["admissible"].items()}
        if adm.get("u_lower", "").strip():
            vals = _floats(adm["u_lower"])
            if len(vals) != k:
                raise ScenarioError(f"{filename}: u_lower needs {k} values")
            kwargs["u_lower"] = np.array(vals)
        if adm.get("u_upper", "").strip():
            vals = _floats(adm["u_upper"])
            if len(vals) != k:
                raise ScenarioError(f"{filename}: u_upper needs {k} values")
            kwargs["u_upper"] = np.array(vals)
    if "boxes" in sections:
        bx = {k2: v for k2, (v, _) in sections["boxes"].items()}
        if bx.get("u_box", "").strip():
            kwargs["u_box"] = _box_from(bx["u_box"], k, f"{filename}: u_box")
        if bx.get("v_box", "").strip():
            kwargs["v_box"] = _box_from(bx["v_box"], l, f"{filename}: v_box")
    if "conserved" in sections:
        cons = {k2: v for k2, (v, _) in sections["conserved"].items()}
        combos = []
        idx = 1
        while f"combo{idx}_u" in cons:
            cu = np.array(_floats(cons[f"combo{idx}_u"]))
            cv = np.array(_floats(cons.get(f"combo{idx}_v", "")))
            if cu.shape != (k,) or cv.shape != (l,):
                raise ScenarioError(f"{filename}: combo{idx} needs {k} u and "
                                    f"{l} v coefficients")
            combos.append((cu, cv))
            idx += 1
        kwargs["conserved_combos"] = tuple(combos)
    name = "custom"
    if "meta" in sections and "name" in sections["meta"]:
        name = sections["meta"]["name"][0]
    try:
        return make_model(k, l, m, diffusion, f, g, ga, gb, wp, wm,
                          constants=constants, name=name, **kwargs)
    except ModelError as exc:
        raise ScenarioError(f"{filename}: {exc}") from exc


def load_model(path) -> ModelSpec:
    sections = read_sections(path)
    text = format_sections({name: {k: v for k, (v, _) in body.items()}
                            for name, body in sections.items()})
    return parse_model_text(text, filename=str(path))


def dump_model(spec: ModelSpec) -> str:
    """Serialize to the model file format (round-trips through load)."""
    sections = {
        "meta": {"name": spec.name},
        "dimensions": {"k": spec.k, "l": spec.l, "m": spec.m},
    }
    if spec.constants:
        sections["constants"] = {k: repr(v) for k, v in spec.constants.items()}
    sections["diffusion"] = {f"D{i + 1}": repr(float(d))
                             for i, d in enumerate(spec.diffusion)}
    sections["reaction"] = {f"f{i + 1}": str(e)
                            for i, e in enumerate(spec.f_exprs)}
    sections["ode"] = {f"g{i + 1}": str(e) for i, e in enumerate(spec.g_exprs)}
    sections["thresholds"] = {"gamma_alpha": str(spec.gamma_alpha),
                              "gamma_beta": str(spec.gamma_beta)}
    branches = {}
    for i, e in enumerate(spec.w_plus_exprs):
        branches[f"w_plus{i + 1}"] = str(e)
    for i, e in enumerate(spec.w_minus_exprs):
        branches[f"w_minus{i + 1}"] = str(e)
    sections["branches"] = branches
    adm = {}
    if spec.u_lower is not None:
        adm["u_lower"] = ", ".join(repr(float(v)) for v in spec.u_lower)
    if spec.u_upper is not None:
        adm["u_upper"] = ", ".join(repr(float(v)) for v in spec.u_upper)
    if adm:
        sections["admissible"] = adm
    boxes = {}
    if spec.u_box is not None:
        boxes["u_box"] = "; ".join(f"{float(row[0])!r}, {float(row[1])!r}"
                                   for row in spec.u_box)
    if spec.v_box is not None:
        boxes["v_box"] = "; ".join(f"{float(row[0])!r}, {float(row[1])!r}"
                                   for row in spec.v_box)
    if boxes:
        sections["boxes"] = boxes
    if spec.conserved_combos:
        cons = {}
        for idx, (cu, cv) in enumerate(spec.conserved_combos, start=1):
            cons[f"combo{idx}_u"] = ", ".join(repr(float(v)) for v in cu)
            cons[f"combo{idx}_v"] = ", ".join(repr(float(v)) for v in cv)
        sections["conserved"] = cons
    return format_sections(sections)
