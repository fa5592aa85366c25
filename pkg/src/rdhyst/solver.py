"""Time integration of the reaction-diffusion system with node-wise relay
hysteresis: a semi-implicit splitting stepper and a fixed-point (Picard)
solver that repeatedly solves the auxiliary problem with the hysteresis
output field frozen along the previous iterate.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from types import SimpleNamespace
from typing import Optional

import numpy as np

from .diffusion import step_components
from .errors import (DomainError, EvaluationError, InitializationError,
                     ModelError, PicardConvergenceError, TransversalityError)
from .freeboundary import (FreeBoundaryTrace, check_topology,
                           check_transversality, conserved_quantities,
                           estimate_Em, find_root_a, update_running_max)
from .grid import Grid, GridFunction
from .model import ModelSpec
from .relay import advance_configuration_field, evaluate_output_field

__all__ = ["SolverConfig", "InitialData", "SolverState", "initialize",
           "step_splitting", "solve_picard", "run", "RunReport"]

logger = logging.getLogger(__name__)

STATUS_COMPLETED = "completed"
STATUS_TRANSVERSALITY_LOST = "transversality_lost"
STATUS_TOPOLOGY_BROKEN = "topology_broken"
STATUS_ERROR = "error"


@dataclass
class SolverConfig:
    dt: float
    theta: float = 0.5
    ode_scheme: str = "midpoint"          # midpoint | rk4
    mode: str = "splitting"               # splitting | picard
    picard_tol: float = 1e-8
    picard_max_iter: int = 40
    picard_window: float = 0.5
    event_substeps: int = 8
    stop_on_transversality_loss: bool = True
    transversality_floor: float = 1e-3
    audit_halfwidth_cells: int = 5
    theta_ramp_steps: int = 2             # leading fully implicit steps
    em_stride: int = 1                    # compute E_m every k-th row
    subpoints: int = 64                   # relay segment scan resolution
    relay_prefilter: bool = True          # endpoint shortcut in the scan

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if not (0.0 <= self.theta <= 1.0):
            raise ValueError("theta must lie in [0, 1]")
        if self.picard_tol <= 0.0:
            raise ValueError("picard_tol must be positive")
        if self.ode_scheme == "explicit-midpoint":
            self.ode_scheme = "midpoint"
        if self.ode_scheme not in ("midpoint", "rk4"):
            raise ValueError(f"unknown ode_scheme {self.ode_scheme!r}")
        if self.mode not in ("splitting", "picard"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class InitialData:
    phi: GridFunction
    psi: GridFunction
    b_bar: float


@dataclass
class SolverState:
    t: float
    u: GridFunction
    v: GridFunction
    xi: np.ndarray
    w: GridFunction
    steps: int = 0
    near_miss: int = 0
    init_transversality: Optional[object] = field(default=None, repr=False)

    @property
    def grid(self) -> Grid:
        return self.u.grid

    def copy(self) -> "SolverState":
        return SolverState(self.t, self.u.copy(), self.v.copy(),
                           self.xi.copy(), self.w.copy(), self.steps,
                           self.near_miss, self.init_transversality)


def _effective_theta(config: SolverConfig, step_index: int) -> float:
    if step_index < config.theta_ramp_steps:
        return 1.0
    return config.theta


def initialize(model: ModelSpec, init: InitialData,
               tol: float = 1e-12) -> SolverState:
    """Build the t = 0 state: two-plateau configuration from b_bar, forced
    where the initial profile sits in M_alpha/M_beta, output cache filled.

    Raises InitializationError when the profile makes the hysteresis
    undefined (gamma_beta(phi) <= 0 left of b_bar, or gamma_alpha(phi) <= 0
    right of it)."""
    grid = init.phi.grid
    if init.psi.grid.n != grid.n:
        raise ValueError("phi and psi must share one grid")
    if not (0.0 < init.b_bar < 1.0):
        raise InitializationError(f"b_bar must lie in (0, 1), got {init.b_bar}")
    if init.phi.d != model.k or init.psi.d != model.l:
        raise InitializationError(
            f"initial data has {init.phi.d}/{init.psi.d} components, model "
            f"needs {model.k}/{model.l}")
    thr = model.thresholds
    thr.check_admissible(init.phi.values)
    x = grid.x
    ga = np.asarray(thr.gamma_alpha(init.phi.values), dtype=np.float64)
    gb = np.asarray(thr.gamma_beta(init.phi.values), dtype=np.float64)
    both = (ga <= tol) & (gb <= tol)
    if np.any(both):
        i = int(np.nonzero(both)[0][0])
        raise ModelError(f"node {i} (x={x[i]:g}): both threshold functions "
                         f"non-positive; thresholds are not disjoint there")
    left = x <= init.b_bar
    bad_left = left & (gb <= 0.0)
    if np.any(bad_left):
        i = int(np.nonzero(bad_left)[0][0])
        raise InitializationError(
            f"hysteresis undefined at node {i} (x={x[i]:g} <= b_bar): "
            f"gamma_beta(phi)={gb[i]:g} <= 0 where the configuration is +1")
    bad_right = ~left & (ga <= 0.0)
    if np.any(bad_right):
        i = int(np.nonzero(bad_right)[0][0])
        raise InitializationError(
            f"hysteresis undefined at node {i} (x={x[i]:g} > b_bar): "
            f"gamma_alpha(phi)={ga[i]:g} <= 0 where the configuration is -1")

    xi = np.where(left, np.int8(1), np.int8(-1))
    xi = np.where(ga <= tol, np.int8(1), xi)
    xi = np.where(gb <= tol, np.int8(-1), xi)

    # discrete Neumann compatibility of phi (warning only)
    h = grid.h
    edge = max(float(np.abs(init.phi.values[1] - init.phi.values[0]).max()),
               float(np.abs(init.phi.values[-1] - init.phi.values[-2]).max())) / h
    if edge > 10.0 * h:
        logger.warning("initial profile has one-sided boundary derivative "
                       "%.3g > %.3g; no-flux compatibility is violated",
                       edge, 10.0 * h)

    w = evaluate_output_field(thr, model.branches, xi, init.phi.values)
    state = SolverState(t=0.0, u=init.phi.copy(),
                        v=init.psi.copy(), xi=xi,
                        w=GridFunction(grid, w))
    state.init_transversality = check_transversality(state, thr)
    if not state.init_transversality.is_transverse:
        logger.warning("initial profile is not transverse (margin %.3g)",
                       state.init_transversality.margin)
    return state


def _ode_advance(model: ModelSpec, u: np.ndarray, v: np.ndarray,
                 w: np.ndarray, dt: float, scheme: str) -> np.ndarray:
    """Advance v' = g(u, v, w) with u and w frozen."""
    if scheme == "midpoint":
        k1 = model.eval_g(u, v, w)
        k2 = model.eval_g(u, v + 0.5 * dt * k1, w)
        return v + dt * k2
    k1 = model.eval_g(u, v, w)
    k2 = model.eval_g(u, v + 0.5 * dt * k1, w)
    k3 = model.eval_g(u, v + 0.5 * dt * k2, w)
    k4 = model.eval_g(u, v + dt * k3, w)
    return v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _advance_once(state: SolverState, model: ModelSpec, config: SolverConfig,
                  dt: float, theta: float) -> SolverState:
    """One plain step: v first (frozen u, w), u by the theta scheme with the
    reaction f(u_old, v_new, w) as explicit source, relay update, w refresh."""
    grid = state.grid
    thr = model.thresholds
    u_old = state.u.values
    v_new = _ode_advance(model, u_old, state.v.values, state.w.values, dt,
                         config.ode_scheme)
    src = model.eval_f(u_old, v_new, state.w.values)
    u_new = step_components(u_old, model.diffusion, dt, theta, src, grid.h)
    xi_new, near = advance_configuration_field(
        thr, state.xi, u_old, u_new, config.subpoints,
        prefilter=config.relay_prefilter)
    w_new = evaluate_output_field(thr, model.branches, xi_new, u_new)
    return SolverState(t=state.t + dt,
                       u=GridFunction(grid, u_new),
                       v=GridFunction(grid, v_new),
                       xi=xi_new,
                       w=GridFunction(grid, w_new),
                       steps=state.steps,
                       near_miss=state.near_miss + near,
                       init_transversality=state.init_transversality)


def step_splitting(state: SolverState, model: ModelSpec, config: SolverConfig,
                   dt: Optional[float] = None) -> SolverState:
    """One macro step of the splitting scheme.

    If the relay flipped anywhere and event_substeps > 1, the macro step is
    redone as that many sub-steps for sharper crossing localization."""
    dt = config.dt if dt is None else dt
    theta = _effective_theta(config, state.steps)
    candidate = _advance_once(state, model, config, dt, theta)
    if config.event_substeps > 1 and np.any(candidate.xi != state.xi):
        sub = state
        dt_sub = dt / config.event_substeps
        for _ in range(config.event_substeps):
            sub = _advance_once(sub, model, config, dt_sub, theta)
        candidate = sub
    candidate.steps = state.steps + 1
    return candidate


def _two_branch_field(model: ModelSpec, u: np.ndarray, x: np.ndarray,
                      b: float) -> np.ndarray:
    """Frozen hysteresis output: active branch left of b, inactive right."""
    xi = np.where(x <= b + 1e-15, np.int8(1), np.int8(-1))
    return evaluate_output_field(model.thresholds, model.branches, xi, u)


def solve_picard(state: SolverState, model: ModelSpec, config: SolverConfig,
                 t_window: float, b_prev: Optional[float] = None):
    """Fixed-point solve over a whole time window.

    Each iteration extracts the root curve a(t) and running max b(t) from
    the current space-time iterate, builds the frozen two-branch output
    field, and solves the auxiliary problem (v by node-wise ODE with the
    frozen field, u by the theta scheme marching forward).  Stops when the
    sup-norm difference between consecutive iterates over the window is at
    most picard_tol.

    Returns (final_state, info) with info carrying the window arrays.
    """
    grid = state.grid
    dt = config.dt
    steps = int(round(t_window / dt))
    if steps < 1 or abs(steps * dt - t_window) > 1e-9 * max(1.0, t_window):
        raise ValueError(f"window {t_window} is not a positive multiple of "
                         f"dt={dt}")
    thr = model.thresholds
    x = grid.x
    if b_prev is None:
        _, j = check_topology(state.xi)
        b_prev = float(x[j]) if j is not None and j >= 0 else 0.0
    npts = grid.npts
    u_iter = np.broadcast_to(state.u.values, (steps + 1, npts, model.k)).copy()
    v_iter = np.broadcast_to(state.v.values, (steps + 1, npts, model.l)).copy()

    residuals = []
    a_curve = np.empty(steps + 1)
    b_curve = np.empty(steps + 1)
    converged = False
    iterations = 0
    w_field = np.empty((steps + 1, npts, model.m))
    for _ in range(config.picard_max_iter):
        iterations += 1
        b_run = b_prev
        for i in range(steps + 1):
            a_i, multiple = find_root_a(GridFunction(grid, u_iter[i]), thr,
                                        b_run)
            if multiple:
                raise TransversalityError(
                    "root of the switching function is not unique "
                    f"(window time index {i})", t=state.t + i * dt)
            b_run = max(b_run, a_i)
            a_curve[i] = a_i
            b_curve[i] = b_run
            w_field[i] = _two_branch_field(model, u_iter[i], x, b_run)
        u_next = np.empty_like(u_iter)
        v_next = np.empty_like(v_iter)
        u_next[0] = state.u.values
        v_next[0] = state.v.values
        for i in range(steps):
            theta = _effective_theta(config, state.steps + i)
            v_next[i + 1] = _ode_advance(model, u_next[i], v_next[i],
                                         w_field[i], dt, config.ode_scheme)
            src = model.eval_f(u_next[i], v_next[i + 1], w_field[i])
            u_next[i + 1] = step_components(u_next[i], model.diffusion, dt,
                                            theta, src, grid.h)
        residual = float(np.max(np.abs(u_next - u_iter)))
        residuals.append(residual)
        u_iter = u_next
        v_iter = v_next
        if residual <= config.picard_tol:
            converged = True
            break
    if not converged:
        raise PicardConvergenceError(
            f"no fixed point within {config.picard_max_iter} iterations "
            f"(last residual {residuals[-1]:.3e})", residuals)

    # recompute the root/output structure of the converged iterate
    b_run = b_prev
    for i in range(steps + 1):
        a_i, multiple = find_root_a(GridFunction(grid, u_iter[i]), thr, b_run)
        if multiple:
            raise TransversalityError(
                "root of the switching function is not unique at the fixed "
                f"point (window time index {i})", t=state.t + i * dt)
        b_run = max(b_run, a_i)
        a_curve[i] = a_i
        b_curve[i] = b_run
        w_field[i] = _two_branch_field(model, u_iter[i], x, b_run)

    xi_final = np.where(x <= b_curve[-1] + 1e-15, np.int8(1), np.int8(-1))
    final = SolverState(t=state.t + t_window,
                        u=GridFunction(grid, u_iter[-1]),
                        v=GridFunction(grid, v_iter[-1]),
                        xi=xi_final,
                        w=GridFunction(grid, w_field[-1]),
                        steps=state.steps + steps,
                        near_miss=state.near_miss,
                        init_transversality=state.init_transversality)
    info = SimpleNamespace(times=state.t + dt * np.arange(steps + 1),
                           a=a_curve.copy(), b=b_curve.copy(),
                           u=u_iter, v=v_iter, w=w_field,
                           residuals=residuals, iterations=iterations)
    return final, info


# --------------------------------------------------------------------------
# instrumented run


@dataclass
class RunReport:
    status: str = STATUS_COMPLETED
    t_stop: Optional[float] = None
    message: Optional[str] = None
    rows: list = field(default_factory=list)
    combo_baseline: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    picard_iterations: list = field(default_factory=list)
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)
    near_miss: int = 0

    def column(self, name):
        return np.array([row[name] for row in self.rows])

    @property
    def n_combos(self) -> int:
        return len(self.combo_baseline)

    def max_abs_drift(self) -> float:
        if not self.combo_baseline or not self.rows:
            return 0.0
        worst = 0.0
        for idx in range(self.n_combos):
            worst = max(worst, float(np.max(np.abs(
                self.column(f"drift{idx + 1}")))))
        return worst


def _row_status(report: RunReport, index: int) -> str:
    if index == len(report.rows) - 1:
        return report.status
    return "ok"


def _diagnostics_row(state: SolverState, model: ModelSpec,
                     config: SolverConfig, trace: FreeBoundaryTrace,
                     baseline, em_cache, row_index: int, b_bar: float):
    """One report row; returns (row, flags) where flags carry the health
    checks used for status transitions."""
    thr = model.thresholds
    topo_ok, j = check_topology(state.xi)
    flags = SimpleNamespace(topology=topo_ok, interface_escaped=False,
                            margin_low=False, multiple=False)
    h = state.grid.h
    if not topo_ok:
        row = {"t": state.t, "a": math.nan, "b": math.nan, "margin": math.nan,
               "em": math.inf, "sup_u": float(np.abs(state.u.values).max()),
               "sup_v": float(np.abs(state.v.values).max()),
               "box_violation": math.nan}
        for idx in range(len(baseline)):
            row[f"drift{idx + 1}"] = math.nan
        return row, flags

    b_prev = trace.b_values[-1] if trace.b_values else b_bar
    a, multiple = find_root_a(state.u, thr, b_prev)
    report = check_transversality(
        state, thr, window_halfwidth=config.audit_halfwidth_cells * h,
        floor=config.transversality_floor)
    margin = report.margin
    flags.multiple = multiple or report.multiple_roots
    update_running_max(trace, state.t, a, margin)
    b = trace.b_values[-1]
    if b < h or b > 1.0 - h:
        flags.interface_escaped = True
    if margin < config.transversality_floor or flags.multiple:
        flags.margin_low = True

    if config.em_stride > 0 and row_index % config.em_stride == 0:
        em_cache["value"] = estimate_Em(
            SimpleNamespace(phi=state.u, psi=state.v, b_bar=b), model)
    row = {"t": state.t, "a": a, "b": b, "margin": margin,
           "em": em_cache.get("value", math.inf),
           "sup_u": float(np.abs(state.u.values).max()),
           "sup_v": float(np.abs(state.v.values).max())}
    if baseline:
        values = conserved_quantities(state, model, model.conserved_combos)
        for idx, (val, base) in enumerate(zip(values, baseline)):
            row[f"drift{idx + 1}"] = (val - base) / max(abs(base), 1e-300)
    row["box_violation"] = _box_violation(state, model)
    return row, flags


def _box_violation(state: SolverState, model: ModelSpec) -> float:
    worst = 0.0
    if model.u_box is not None:
        lo, hi = model.u_box[:, 0], model.u_box[:, 1]
        worst = max(worst, float(np.max(np.maximum(lo - state.u.values,
                                                   0.0))))
        worst = max(worst, float(np.max(np.maximum(state.u.values - hi,
                                                   0.0))))
    if model.v_box is not None:
        lo, hi = model.v_box[:, 0], model.v_box[:, 1]
        worst = max(worst, float(np.max(np.maximum(lo - state.v.values,
                                                   0.0))))
        worst = max(worst, float(np.max(np.maximum(state.v.values - hi,
                                                   0.0))))
    return worst


def run(model: ModelSpec, init: InitialData, t_final: float,
        config: SolverConfig, snapshot_times=()):
    """Integrate to t_final or stop early; per-step diagnostics are appended
    to the RunReport (free boundary, transversality margin, E_m index,
    conservation drifts, sup norms, box violations).

    Status: completed | transversality_lost | topology_broken | error.
    With stop_on_transversality_loss the run halts at the first step whose
    margin falls below the floor (or whose root is no longer unique).
    Returns (final_state, report, snapshots)."""
    if t_final < 0.0:
        raise ValueError("t_final must be non-negative")
    started = time.perf_counter()
    report = RunReport(config=dataclasses.asdict(config))
    state = initialize(model, init)
    trace = FreeBoundaryTrace()
    baseline = conserved_quantities(state, model, model.conserved_combos) \
        if model.conserved_combos else []
    report.combo_baseline = list(baseline)
    em_cache = {}
    snapshots = []
    pending = sorted(float(ts) for ts in snapshot_times)

    def take_snapshots(current: SolverState):
        while pending and current.t >= pending[0] - 1e-12:
            snapshots.append((pending.pop(0), current.copy()))

    row, flags = _diagnostics_row(state, model, config, trace, baseline,
                                  em_cache, 0, init.b_bar)
    report.rows.append(row)
    take_snapshots(state)
    if not flags.topology:
        report.status = STATUS_TOPOLOGY_BROKEN
        report.t_stop = 0.0
    elif flags.margin_low and config.stop_on_transversality_loss:
        report.status = STATUS_TRANSVERSALITY_LOST
        report.t_stop = 0.0

    total_steps = max(0, math.ceil(t_final / config.dt - 1e-9))
    if report.status == STATUS_COMPLETED and total_steps > 0:
        if config.mode == "splitting":
            _run_splitting(state, model, config, t_final, total_steps, report,
                           trace, baseline, em_cache, take_snapshots,
                           init.b_bar)
        else:
            _run_picard(state, model, config, t_final, total_steps, report,
                        trace, baseline, em_cache, take_snapshots,
                        init.b_bar)
        state = report.final_state
    report.wall_time = time.perf_counter() - started
    report.near_miss = state.near_miss
    if state.near_miss:
        logger.warning("relay inputs dipped within the near-miss band without "
                       "crossing at %d node-steps", state.near_miss)
    if hasattr(report, "final_state"):
        del report.final_state
    return state, report, snapshots


def _apply_flags(report: RunReport, config: SolverConfig, state: SolverState,
                 flags) -> bool:
    if not flags.topology or flags.interface_escaped:
        report.status = STATUS_TOPOLOGY_BROKEN
        report.t_stop = state.t
        return True
    if flags.margin_low and config.stop_on_transversality_loss:
        report.status = STATUS_TRANSVERSALITY_LOST
        report.t_stop = state.t
        return True
    return False


def _run_splitting(state, model, config, t_final, total_steps, report, trace,
                   baseline, em_cache, take_snapshots, b_bar):
    for step in range(total_steps):
        t_next = min((step + 1) * config.dt, t_final)
        dt_step = t_next - state.t
        try:
            state = step_splitting(state, model, config, dt=dt_step)
        except (DomainError, EvaluationError, ModelError) as exc:
            report.status = STATUS_ERROR
            report.message = str(exc)
            report.t_stop = state.t
            break
        state.t = t_next
        row, flags = _diagnostics_row(state, model, config, trace, baseline,
                                      em_cache, step + 1, b_bar)
        report.rows.append(row)
        take_snapshots(state)
        if _apply_flags(report, config, state, flags):
            break
    report.final_state = state


def _run_picard(state, model, config, t_final, total_steps, report, trace,
                baseline, em_cache, take_snapshots, b_bar):
    window_steps = max(1, int(round(config.picard_window / config.dt)))
    done = 0
    while done < total_steps:
        chunk = min(window_steps, total_steps - done)
        t_target = min((done + chunk) * config.dt, t_final)
        span = t_target - state.t
        cfg = config
        if abs(span - chunk * config.dt) > 1e-9:
            cfg = dataclasses.replace(config, dt=span / chunk)
        try:
            new_state, info = solve_picard(state, model, cfg, span,
                                           b_prev=trace.b_values[-1]
                                           if trace.b_values else None)
        except TransversalityError as exc:
            report.status = STATUS_TRANSVERSALITY_LOST
            report.t_stop = exc.t if exc.t is not None else state.t
            report.message = str(exc)
            break
        except PicardConvergenceError as exc:
            report.status = STATUS_ERROR
            report.message = str(exc)
            report.residual_history = exc.residuals
            report.t_stop = state.t
            break
        except (DomainError, EvaluationError, ModelError) as exc:
            report.status = STATUS_ERROR
            report.message = str(exc)
            report.t_stop = state.t
            break
        report.residual_history.extend(info.residuals)
        report.picard_iterations.append(info.iterations)
        stop = False
        inner = state
        for i in range(1, chunk + 1):
            inner = SolverState(
                t=float(info.times[i]),
                u=GridFunction(state.grid, info.u[i]),
                v=GridFunction(state.grid, info.v[i]),
                xi=np.where(state.grid.x <= info.b[i] + 1e-15, np.int8(1),
                            np.int8(-1)),
                w=GridFunction(state.grid, info.w[i]),
                steps=state.steps + i, near_miss=state.near_miss,
                init_transversality=state.init_transversality)
            row, flags = _diagnostics_row(inner, model, config, trace,
                                          baseline, em_cache, done + i, b_bar)
            report.rows.append(row)
            take_snapshots(inner)
            if _apply_flags(report, config, inner, flags):
                stop = True
                break
        state = inner if stop else new_state
        if stop:
            break
        done += chunk
    report.final_state = state
