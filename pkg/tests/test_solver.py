"""Initialization, splitting stepper, fixed-point solver and the run loop."""
import dataclasses

import numpy as np
import pytest

from rdhyst.errors import InitializationError
from rdhyst.grid import Grid, GridFunction
from rdhyst.model import builtin_bacteria_model, make_model
from rdhyst.relay import evaluate_output_field
from rdhyst.solver import (InitialData, SolverConfig, initialize, run,
                           solve_picard, step_splitting)


def reference_model():
    return builtin_bacteria_model()


def reference_init(n=200):
    grid = Grid(n)
    x = grid.x
    phi = np.stack([1.5 - 0.6 * np.tanh((x - 0.5) / 0.15),
                    np.full_like(x, 2.0)], axis=1)
    psi = np.full((grid.npts, 1), 0.1)
    return InitialData(GridFunction(grid, phi), GridFunction(grid, psi), 0.5)


def frozen_model(f="0", g="0", diffusion=0.01):
    """Wide thresholds: the relay never fires, w is the active constant."""
    return make_model(k=1, l=1, m=1, diffusion=[diffusion], f=[f], g=[g],
                      gamma_alpha="10 - u1", gamma_beta="u1 + 10",
                      w_plus=["1"], w_minus=["0"])


def simple_init(grid, phi_vals, psi_vals, b_bar=0.5):
    return InitialData(GridFunction(grid, phi_vals),
                       GridFunction(grid, psi_vals), b_bar)


class TestInitialize:
    def test_reference_single_interface(self):
        state = initialize(reference_model(), reference_init())
        x = state.grid.x
        np.testing.assert_array_equal(state.xi, np.where(x <= 0.5, 1, -1))
        assert state.init_transversality.is_transverse
        # hand computation: grad(gamma_alpha).phi' = -phi1'(x) =
        # (0.6/0.15) sech^2((x-0.5)/0.15), minimized over the audit window
        # at its right end x = 0.5 + 5h (phi2 is flat, so only u1 enters)
        h = state.grid.h
        expected = 4.0 / np.cosh(5 * h / 0.15) ** 2
        assert state.init_transversality.margin == pytest.approx(
            expected, rel=1e-3)

    def test_cache_coherent(self):
        model = reference_model()
        state = initialize(model, reference_init())
        w = evaluate_output_field(model.thresholds, model.branches, state.xi,
                                  state.u.values)
        np.testing.assert_array_equal(state.w.values, w)
        # active branch is lambda = 1 left of the interface, 0 right of it
        np.testing.assert_array_equal(
            state.w.values[:, 0], np.where(state.grid.x <= 0.5, 1.0, 0.0))

    def test_profile_inside_memory_region_keeps_xi0(self):
        grid = Grid(32)
        model = frozen_model()
        state = initialize(model, simple_init(grid, np.zeros(33),
                                              np.zeros(33), b_bar=0.3))
        np.testing.assert_array_equal(state.xi,
                                      np.where(grid.x <= 0.3, 1, -1))

    def test_condition_violation_left(self):
        """gamma_beta(phi) < 0 where the configuration is +1."""
        model = make_model(k=1, l=1, m=1, diffusion=[0.01], f=["0"], g=["0"],
                           gamma_alpha="1 - u1", gamma_beta="u1",
                           w_plus=["1"], w_minus=["0"])
        grid = Grid(32)
        with pytest.raises(InitializationError):
            initialize(model, simple_init(grid, np.full(33, -0.2),
                                          np.zeros(33)))

    def test_condition_violation_right(self):
        """gamma_alpha(phi) <= 0 right of b_bar."""
        model = make_model(k=1, l=1, m=1, diffusion=[0.01], f=["0"], g=["0"],
                           gamma_alpha="1 - u1", gamma_beta="u1",
                           w_plus=["1"], w_minus=["0"])
        grid = Grid(32)
        with pytest.raises(InitializationError):
            initialize(model, simple_init(grid, np.full(33, 1.5),
                                          np.zeros(33)))

    def test_bad_b_bar(self):
        with pytest.raises(InitializationError):
            initialize(frozen_model(),
                       simple_init(Grid(32), np.zeros(33), np.zeros(33),
                                   b_bar=1.5))


class TestSplittingStep:
    def test_frozen_dynamics_state_unchanged(self):
        grid = Grid(32)
        model = frozen_model(f="0", g="0")
        vals = np.full(33, 0.0)
        state = initialize(model, simple_init(grid, vals, vals))
        cfg = SolverConfig(dt=1e-2)
        new = step_splitting(state, model, cfg)
        assert new.t == pytest.approx(1e-2)
        # constant profile: diffusion and sources both vanish
        np.testing.assert_array_equal(new.u.values, state.u.values)
        np.testing.assert_array_equal(new.v.values, state.v.values)
        np.testing.assert_array_equal(new.xi, state.xi)

    def test_pure_diffusion_sup_nonincreasing(self):
        grid = Grid(64)
        model = frozen_model(f="0", g="0", diffusion=0.1)
        rng = np.random.default_rng(0)
        vals = rng.standard_normal(65)
        state = initialize(model, simple_init(grid, vals, np.zeros(65)))
        cfg = SolverConfig(dt=5e-3)
        for _ in range(20):
            new = step_splitting(state, model, cfg)
            assert np.abs(new.u.values).max() <= \
                np.abs(state.u.values).max() + 1e-12
            state = new

    def test_cache_coherence_along_run(self):
        model = reference_model()
        state = initialize(model, reference_init(64))
        cfg = SolverConfig(dt=2e-3)
        for _ in range(10):
            state = step_splitting(state, model, cfg)
            w = evaluate_output_field(model.thresholds, model.branches,
                                      state.xi, state.u.values)
            np.testing.assert_array_equal(state.w.values, w)


class TestPicard:
    def test_constant_map_converges_immediately(self):
        """f = g = 0 with constant data: the window map is constant, so the
        first pass already reproduces the initial state."""
        grid = Grid(32)
        model = frozen_model()
        vals = np.zeros(33)
        state = initialize(model, simple_init(grid, vals, vals))
        cfg = SolverConfig(dt=1e-2, mode="picard")
        final, info = solve_picard(state, model, cfg, 0.1)
        assert info.iterations == 1
        assert info.residuals[0] == 0.0
        np.testing.assert_array_equal(final.u.values, state.u.values)

    def test_hysteresis_independent_identical_from_first_iterate(self):
        """When f, g ignore w, the first pass equals the splitting solution
        and the second residual is exactly zero."""
        grid = Grid(32)
        model = frozen_model(f="-0.4*u1 + 0.1", g="-0.2*v1", diffusion=0.05)
        rng = np.random.default_rng(1)
        phi = 0.5 + 0.1 * rng.standard_normal(33)
        psi = 0.3 + 0.1 * rng.standard_normal(33)
        init = simple_init(grid, phi, psi)
        state = initialize(model, init)
        cfg = SolverConfig(dt=2e-3, mode="picard")
        final, info = solve_picard(state, model, cfg, 0.05)

        split_state = initialize(model, init)
        split_cfg = dataclasses.replace(cfg, mode="splitting")
        for _ in range(25):
            split_state = step_splitting(split_state, model, split_cfg)
        np.testing.assert_allclose(final.u.values, split_state.u.values,
                                   atol=1e-12)
        assert info.iterations == 2
        assert info.residuals[1] == 0.0

    def test_window_must_be_dt_multiple(self):
        grid = Grid(32)
        model = frozen_model()
        state = initialize(model, simple_init(grid, np.zeros(33),
                                              np.zeros(33)))
        with pytest.raises(ValueError):
            solve_picard(state, model, SolverConfig(dt=1e-2), 0.015)


class TestRun:
    def test_zero_horizon_single_row(self):
        model = reference_model()
        state, report, _ = run(model, reference_init(64), 0.0,
                               SolverConfig(dt=1e-3))
        assert report.status == "completed"
        assert len(report.rows) == 1
        assert state.t == 0.0

    def test_reference_healthy(self, reference_run):
        state, report, _ = reference_run
        b = report.column("b")
        assert report.status == "completed"
        assert np.all(np.diff(b) >= 0.0)
        assert report.column("box_violation").max() <= 1e-8

    def test_forced_picard_nonconvergence_reported(self):
        """A moving front with genuine output feedback cannot reach 1e-12
        in two iterations; the failure is reported with the residuals."""
        model = make_model(k=1, l=1, m=1, diffusion=[1e-5],
                           f=["0.16 + 0.1*w1"], g=["0"],
                           gamma_alpha="1 - u1", gamma_beta="u1 + 1",
                           w_plus=["1"], w_minus=["0"])
        grid = Grid(64)
        phi = 1.0 - 10.0 * ((grid.x - 0.7) ** 3 + 0.008)
        init = simple_init(grid, phi, np.zeros(65))
        cfg = SolverConfig(dt=1e-3, mode="picard", picard_tol=1e-12,
                           picard_max_iter=2, picard_window=0.2)
        state, report, _ = run(model, init, 0.2, cfg)
        assert report.status == "error"
        assert report.residual_history
        assert "fixed point" in report.message

    def test_event_substeps_exercised(self, tangency_scenario):
        """The tangency run flips relays mid-flight; with and without
        sub-stepping both terminate at nearly the same time."""
        sc = tangency_scenario
        cfg1 = dataclasses.replace(sc.config, event_substeps=8)
        cfg8 = dataclasses.replace(sc.config, event_substeps=1)
        _, rep1, _ = run(sc.model, sc.build_initial(), sc.t_final, cfg1)
        _, rep8, _ = run(sc.model, sc.build_initial(), sc.t_final, cfg8)
        assert rep1.status == rep8.status == "transversality_lost"
        assert abs(rep1.t_stop - rep8.t_stop) <= 0.01

    def test_snapshot_times(self):
        model = reference_model()
        state, report, snaps = run(model, reference_init(64), 0.02,
                                   SolverConfig(dt=1e-3),
                                   snapshot_times=(0.0, 0.01, 0.02))
        assert [ts for ts, _ in snaps] == [0.0, 0.01, 0.02]
        assert snaps[0][1].t == 0.0

    def test_conservation_short_run(self):
        model = reference_model()
        state, report, _ = run(model, reference_init(100), 0.1,
                               SolverConfig(dt=1e-3))
        assert report.max_abs_drift() < 1e-5

    def test_rk4_scheme_runs(self):
        model = reference_model()
        cfg = SolverConfig(dt=1e-3, ode_scheme="rk4")
        state, report, _ = run(model, reference_init(64), 0.05, cfg)
        assert report.status == "completed"

    def test_em_column_finite_on_reference(self, reference_run):
        _, report, _ = reference_run
        em = report.column("em")
        assert em[0] == 10  # regression pin at n = 200
        assert np.all(np.isfinite(em))

    def test_margin_column_positive_while_running(self, reference_run):
        _, report, _ = reference_run
        margin = report.column("margin")
        assert np.all(margin[np.isfinite(margin)] > 0)


class TestEscapeAndFractionalSteps:
    def test_front_exiting_domain_breaks_topology(self):
        """A strictly rising profile marches the root to the right edge;
        the runner reports topology_broken when b leaves [h, 1-h]."""
        model = make_model(k=1, l=1, m=1, diffusion=[1e-5],
                           f=["0.8"], g=["0"],
                           gamma_alpha="1 - u1", gamma_beta="u1 + 1",
                           w_plus=["1"], w_minus=["0"])
        grid = Grid(100)
        phi = 1.0 - 0.7 * (grid.x - 0.5)
        init = simple_init(grid, phi, np.zeros(101))
        state, report, _ = run(model, init, 1.0, SolverConfig(dt=1e-3))
        assert report.status == "topology_broken"
        assert 0.3 < report.t_stop < 0.6

    def test_fractional_final_step(self):
        model = reference_model()
        state, report, _ = run(model, reference_init(64), 0.0105,
                               SolverConfig(dt=1e-3))
        assert report.status == "completed"
        assert state.t == pytest.approx(0.0105, abs=1e-12)
        assert len(report.rows) == 12  # row 0 plus 11 steps
