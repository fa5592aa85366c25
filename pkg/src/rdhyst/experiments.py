"""Experiment suites over scenarios: perturbation response, grid-refinement
self-convergence, and splitting-versus-fixed-point agreement."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InitializationError, ModelError, PicardConvergenceError, \
    RdhystError
from .grid import Grid, GridFunction
from .norms import lq_norm
from .scenario import Scenario
from .solver import InitialData, run

__all__ = ["run_scenario", "perturbation_study", "convergence_study",
           "compare_solvers", "neumann_bump", "PerturbRow"]


def run_scenario(scenario: Scenario, config=None, grid: Optional[Grid] = None,
                 snapshot_times=None):
    """Integrate a scenario; returns (state, report, snapshots)."""
    grid = grid or scenario.grid()
    init = scenario.build_initial(grid)
    config = config or scenario.config
    times = scenario.snapshot_times if snapshot_times is None else snapshot_times
    return run(scenario.model, init, scenario.t_final, config,
               snapshot_times=times)


def neumann_bump(x: np.ndarray, rng: np.random.Generator,
                 modes: int = 4) -> np.ndarray:
    """Smooth random bump sum(c_j cos(j pi x)), normalized to sup 1.

    Cosine modes have zero slope at both endpoints, so perturbed profiles
    stay in the no-flux compatibility class."""
    coeffs = rng.standard_normal(modes)
    vals = np.zeros_like(x)
    for j, c in enumerate(coeffs, start=1):
        vals += c * np.cos(j * np.pi * x)
    return vals / np.abs(vals).max()


@dataclass
class PerturbRow:
    eps: float
    du_sup: float = math.nan
    db_sup: float = math.nan
    dv_lq: float = math.nan
    status: str = "completed"
    failed: bool = False
    message: str = ""


def perturbation_study(scenario: Scenario, eps_list, seed: int = 0,
                       q: float = 4.0, audit_count: int = 51):
    """Continuous-dependence table.

    The base profile phi is perturbed by eps * rho(x) per component, psi by
    eps * rho'(x) (independent seeded bumps) and the configuration jump
    b_bar by eps; each perturbed run is compared to the base through the
    sup norm of u at T, the sup over [0, T] of |b_eps - b|, and the sup
    over audit times of the L_q norm of the v difference."""
    grid = scenario.grid()
    x = grid.x
    t_final = scenario.t_final
    audit_times = tuple(np.linspace(0.0, t_final, audit_count))
    base_state, base_report, base_snaps = run_scenario(
        scenario, snapshot_times=audit_times)
    if base_report.status != "completed":
        raise RdhystError(f"base scenario did not complete: "
                          f"{base_report.status}")
    base_b = base_report.column("b")
    base_v = {round(ts, 12): snap.v.values for ts, snap in base_snaps}

    rng = np.random.default_rng(seed)
    bumps_phi = [neumann_bump(x, rng) for _ in range(scenario.model.k)]
    bumps_psi = [neumann_bump(x, rng) for _ in range(scenario.model.l)]

    phi0, psi0 = scenario.initial_values(grid)
    rows = []
    for eps in eps_list:
        eps = float(eps)
        phi = phi0 + eps * np.stack(bumps_phi, axis=1)
        psi = psi0 + eps * np.stack(bumps_psi, axis=1)
        try:
            init = InitialData(GridFunction(grid, phi),
                               GridFunction(grid, psi),
                               scenario.b_bar + eps)
            state, report, snaps = run(scenario.model, init, t_final,
                                       scenario.config,
                                       snapshot_times=audit_times)
        except (InitializationError, ModelError, ValueError) as exc:
            rows.append(PerturbRow(eps=eps, status="init_error", failed=True,
                                   message=str(exc)))
            continue
        if report.status != "completed":
            rows.append(PerturbRow(eps=eps, status=report.status, failed=True,
                                   message=report.message or ""))
            continue
        du = float(np.abs(state.u.values - base_state.u.values).max())
        b = report.column("b")
        m = min(b.size, base_b.size)
        db = float(np.abs(b[:m] - base_b[:m]).max())
        dv = 0.0
        for ts, snap in snaps:
            ref = base_v.get(round(ts, 12))
            if ref is None:
                continue
            dv = max(dv, lq_norm(GridFunction(grid, snap.v.values - ref), q))
        rows.append(PerturbRow(eps=eps, du_sup=du, db_sup=db, dv_lq=dv))
    return rows


def convergence_study(scenario: Scenario, levels: int, em_budget: int = 200):
    """(h, dt) -> (h/2, dt/2) refinement table.

    Returns rows [{level, n, dt, diff_u, diff_b, ratio_u}] where diff_u is
    the sup norm of the difference with the previous level's u(., T)
    restricted to the coarser grid, and ratio_u the quotient of successive
    diffs."""
    if levels < 3:
        raise ValueError("need at least 3 refinement levels")
    finals = []
    b_finals = []
    rows = []
    for j in range(levels):
        n = scenario.n * 2**j
        dt = scenario.config.dt / 2**j
        steps = max(1, math.ceil(scenario.t_final / dt - 1e-9))
        config = dataclasses.replace(
            scenario.config, dt=dt,
            em_stride=max(1, steps // em_budget))
        grid = Grid(n)
        state, report, _ = run_scenario(scenario, config=config, grid=grid,
                                        snapshot_times=())
        if report.status != "completed":
            raise RdhystError(f"refinement level {j} (n={n}) did not "
                              f"complete: {report.status}")
        finals.append(state.u.values)
        b_finals.append(report.column("b")[-1])
        rows.append({"level": j, "n": n, "dt": dt, "diff_u": math.nan,
                     "diff_b": math.nan, "ratio_u": math.nan})
    for j in range(1, levels):
        coarse = finals[j - 1]
        fine = finals[j][::2]
        rows[j]["diff_u"] = float(np.abs(coarse - fine).max())
        rows[j]["diff_b"] = float(abs(b_finals[j] - b_finals[j - 1]))
    for j in range(2, levels):
        prev, cur = rows[j - 1]["diff_u"], rows[j]["diff_u"]
        rows[j]["ratio_u"] = prev / cur if cur > 0 else math.inf
    return rows


def compare_solvers(scenario: Scenario):
    """Run the splitting and fixed-point modes on identical grids and
    report sup-norm differences of u, v and the free boundary."""
    split_cfg = dataclasses.replace(scenario.config, mode="splitting")
    picard_cfg = dataclasses.replace(scenario.config, mode="picard")
    s_state, s_report, _ = run_scenario(scenario, config=split_cfg,
                                        snapshot_times=())
    result = {
        "splitting_status": s_report.status,
        "picard_status": None,
        "picard_converged": False,
        "residual_history": [],
        "du_sup": math.nan, "dv_sup": math.nan, "db_sup": math.nan,
    }
    try:
        p_state, p_report, _ = run_scenario(scenario, config=picard_cfg,
                                            snapshot_times=())
    except PicardConvergenceError as exc:
        result["picard_status"] = "error"
        result["residual_history"] = list(exc.residuals)
        result["message"] = str(exc)
        return result
    result["picard_status"] = p_report.status
    result["residual_history"] = list(p_report.residual_history)
    if p_report.status == "error":
        result["message"] = p_report.message
        return result
    result["picard_converged"] = True
    result["du_sup"] = float(np.abs(s_state.u.values - p_state.u.values).max())
    result["dv_sup"] = float(np.abs(s_state.v.values - p_state.v.values).max())
    sb = s_report.column("b")
    pb = p_report.column("b")
    m = min(sb.size, pb.size)
    result["db_sup"] = float(np.abs(sb[:m] - pb[:m]).max())
    result["picard_iterations_max"] = max(p_report.picard_iterations,
                                          default=0)
    return result
