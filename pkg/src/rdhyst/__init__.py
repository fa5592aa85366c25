"""Reaction-diffusion systems with spatially distributed relay hysteresis.

A solver library and CLI for 1-D systems of diffusing fields coupled to
non-diffusing node-local quantities through a two-branch relay with
vector-valued thresholds, plus free-boundary tracking, transversality
monitoring and the experiment suites built on top.
"""

from .errors import (DomainError, EvaluationError, InitializationError,
                     ModelError, ParseError, PicardConvergenceError,
                     RdhystError, ScenarioError, TransversalityError)
from .expressions import Expression, eval_expression, grad_expression, \
    parse_expression
from .grid import Grid, GridFunction, interpolate
from .diffusion import implicit_diffusion_step
from .norms import holder_quotient, lq_norm, sobolev_fractional_norm
from .relay import (BranchPair, Region, ThresholdPair, advance_configuration,
                    classify_region, evaluate_output, init_configuration,
                    relay_trace)
from .model import (ModelSpec, ValidationReport, builtin_bacteria_model,
                    dump_model, load_model, make_model, validate_model)
from .freeboundary import (FreeBoundaryTrace, TransversalityReport,
                           check_topology, check_transversality,
                           conserved_quantities, estimate_Em,
                           estimate_holder_quotient, find_root_a,
                           update_running_max, validate_dissipativity)
from .solver import (InitialData, RunReport, SolverConfig, SolverState,
                     initialize, run, solve_picard, step_splitting)
from .scenario import Scenario, load_scenario

__version__ = "0.1.0"
