"""Scenario files: one sectioned text file fully determines a run.

Sections::

    [model]    builtin = bacteria | file = relative/path.model
               (other keys override builtin parameters)
    [grid]     n
    [time]     dt, T
    [solver]   mode, theta, ode_scheme, event_substeps, picard_*,
               stop_on_transversality_loss, transversality_floor, em_stride
    [initial]  u1..uk, v1..vl as expressions of x; b_bar
    [output]   snapshot_times (comma-separated, optional)
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ParseError, ScenarioError
from .expressions import eval_expression, parse_expression
from .grid import Grid, GridFunction
from .model import ModelSpec, builtin_bacteria_model, load_model
from .solver import InitialData, SolverConfig

__all__ = ["Scenario", "load_scenario", "parse_scenario_text"]

_BOOL = {"true": True, "yes": True, "on": True, "1": True,
         "false": False, "no": False, "off": False, "0": False}


def _get(sections, section, key, filename, default=None, required=False):
    body = sections.get(section, {})
    if key not in body:
        if required:
            raise ScenarioError(f"{filename}: missing {key!r} in [{section}]")
        return default, None
    return body[key]


def _as_bool(text, filename, line):
    try:
        return _BOOL[text.strip().lower()]
    except KeyError:
        raise ScenarioError(f"{filename}:{line}: expected a boolean, got "
                            f"{text!r}") from None


@dataclass
class Scenario:
    model: ModelSpec
    n: int
    t_final: float
    config: SolverConfig
    phi_texts: tuple
    psi_texts: tuple
    b_bar: float
    snapshot_times: tuple = ()
    name: str = "scenario"
    path: Optional[Path] = None
    _phi_exprs: tuple = field(default=(), repr=False)
    _psi_exprs: tuple = field(default=(), repr=False)

    def grid(self) -> Grid:
        return Grid(self.n)

    def initial_values(self, grid: Optional[Grid] = None):
        grid = grid or self.grid()
        x = grid.x
        phi = np.stack([eval_expression(e, {"x": x}) * np.ones_like(x)
                        for e in self._phi_exprs], axis=1)
        psi = np.stack([eval_expression(e, {"x": x}) * np.ones_like(x)
                        for e in self._psi_exprs], axis=1)
        return phi, psi

    def build_initial(self, grid: Optional[Grid] = None) -> InitialData:
        grid = grid or self.grid()
        phi, psi = self.initial_values(grid)
        return InitialData(GridFunction(grid, phi), GridFunction(grid, psi),
                           self.b_bar)


def parse_scenario_text(sections, filename="<scenario>",
                        base_dir: Optional[Path] = None) -> Scenario:
    """Build a Scenario from parsed sections ({name: {key: (value, line)}})."""
    if "model" not in sections:
        raise ScenarioError(f"{filename}: missing [model] section")
    model_sec = sections["model"]
    if "file" in model_sec:
        rel, line = model_sec["file"]
        path = Path(rel)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ScenarioError(f"{filename}:{line}: model file {path} does "
                                f"not exist")
        model = load_model(path)
    elif "builtin" in model_sec:
        name, line = model_sec["builtin"]
        if name != "bacteria":
            raise ScenarioError(f"{filename}:{line}: unknown builtin model "
                                f"{name!r} (available: bacteria)")
        params = {}
        for key, (val, vline) in model_sec.items():
            if key in ("builtin", "file"):
                continue
            try:
                params[key] = float(val)
            except ValueError:
                raise ScenarioError(f"{filename}:{vline}: parameter {key} "
                                    f"must be numeric, got {val!r}") from None
        model = builtin_bacteria_model(params)
    else:
        raise ScenarioError(f"{filename}: [model] needs 'builtin' or 'file'")

    def scalar(section, key, cast, required=True, default=None):
        val, line = _get(sections, section, key, filename, required=required)
        if val is None:
            return default
        try:
            return cast(val)
        except ValueError:
            raise ScenarioError(f"{filename}:{line}: bad value for {key}: "
                                f"{val!r}") from None

    n = scalar("grid", "n", int)
    dt = scalar("time", "dt", float)
    t_final = scalar("time", "T", float)
    if t_final < 0:
        raise ScenarioError(f"{filename}: T must be non-negative")

    cfg_kwargs = {"dt": dt}
    solver_sec = sections.get("solver", {})
    for key, (val, line) in solver_sec.items():
        if key in ("theta", "picard_tol", "picard_window",
                   "transversality_floor"):
            cfg_kwargs[key] = float(val)
        elif key in ("picard_max_iter", "event_substeps", "em_stride",
                     "audit_halfwidth_cells", "theta_ramp_steps", "subpoints"):
            cfg_kwargs[key] = int(val)
        elif key == "stop_on_transversality_loss":
            cfg_kwargs[key] = _as_bool(val, filename, line)
        elif key in ("mode", "ode_scheme"):
            cfg_kwargs[key] = val.strip()
        else:
            raise ScenarioError(f"{filename}:{line}: unknown solver option "
                                f"{key!r}")
    try:
        config = SolverConfig(**cfg_kwargs)
    except ValueError as exc:
        raise ScenarioError(f"{filename}: {exc}") from None

    if "initial" not in sections:
        raise ScenarioError(f"{filename}: missing [initial] section")
    init_sec = {k: v for k, (v, _) in sections["initial"].items()}
    b_bar = scalar("initial", "b_bar", float)
    phi_texts, psi_texts = [], []
    phi_exprs, psi_exprs = [], []
    for idx in range(model.k):
        key = f"u{idx + 1}"
        if key not in init_sec:
            raise ScenarioError(f"{filename}: [initial] missing {key}")
        phi_texts.append(init_sec[key])
    for idx in range(model.l):
        key = f"v{idx + 1}"
        if key not in init_sec:
            raise ScenarioError(f"{filename}: [initial] missing {key}")
        psi_texts.append(init_sec[key])
    for text in phi_texts:
        try:
            phi_exprs.append(parse_expression(text, ("x",), model.constants))
        except ParseError as exc:
            raise ScenarioError(f"{filename}: initial expression {text!r}: "
                                f"{exc}") from None
    for text in psi_texts:
        try:
            psi_exprs.append(parse_expression(text, ("x",), model.constants))
        except ParseError as exc:
            raise ScenarioError(f"{filename}: initial expression {text!r}: "
                                f"{exc}") from None

    snapshot_times = ()
    out_sec = sections.get("output", {})
    if "snapshot_times" in out_sec:
        raw, line = out_sec["snapshot_times"]
        try:
            snapshot_times = tuple(float(tok) for tok in raw.split(",")
                                   if tok.strip())
        except ValueError:
            raise ScenarioError(f"{filename}:{line}: bad snapshot_times "
                                f"{raw!r}") from None
        bad = [ts for ts in snapshot_times if not 0.0 <= ts <= t_final]
        if bad:
            raise ScenarioError(f"{filename}:{line}: snapshot times {bad} "
                                f"outside [0, T]")
    name = "scenario"
    if "meta" in sections and "name" in sections["meta"]:
        name = sections["meta"]["name"][0]
    return Scenario(model=model, n=n, t_final=t_final, config=config,
                    phi_texts=tuple(phi_texts), psi_texts=tuple(psi_texts),
                    b_bar=b_bar, snapshot_times=snapshot_times, name=name,
                    _phi_exprs=tuple(phi_exprs), _psi_exprs=tuple(psi_exprs))


def load_scenario(path) -> Scenario:
    from .textconfig import read_sections

    path = Path(path)
    sections = read_sections(path)
    scenario = parse_scenario_text(sections, filename=str(path),
                                   base_dir=path.parent)
    scenario.path = path
    if scenario.name == "scenario":
        scenario.name = path.stem
    return scenario
