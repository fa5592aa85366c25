"""Free-boundary extraction, transversality, E_m, condition validators."""
import math
from types import SimpleNamespace

import numpy as np
import pytest

from rdhyst.freeboundary import (FreeBoundaryTrace, check_topology,
                                 check_transversality, conserved_quantities,
                                 estimate_Em, estimate_holder_quotient,
                                 find_root_a, update_running_max,
                                 validate_dissipativity)
from rdhyst.grid import Grid, GridFunction
from rdhyst.model import builtin_bacteria_model, make_model
from rdhyst.relay import ThresholdPair


def id_thresholds():
    """gamma_alpha(u) = u1 so roots of the profile are roots of u itself."""
    return ThresholdPair(gamma_alpha=lambda u: u[..., 0],
                         gamma_beta=lambda u: u[..., 0] + 10.0,
                         grad_alpha=lambda u: np.stack(
                             [np.ones(u.shape[:-1])], axis=-1),
                         grad_beta=lambda u: np.stack(
                             [np.ones(u.shape[:-1])], axis=-1), k=1)


class TestFindRoot:
    def test_linear_root(self):
        g = Grid(100)
        u = GridFunction(g, g.x - 0.4)
        a, multiple = find_root_a(u, id_thresholds(), 0.0)
        assert not multiple
        assert a == pytest.approx(0.4, abs=1e-10)

    def test_no_root_returns_b_prev(self):
        g = Grid(50)
        u = GridFunction(g, np.ones(51))
        a, multiple = find_root_a(u, id_thresholds(), 0.3)
        assert (a, multiple) == (0.3, False)

    def test_two_roots_flagged(self):
        g = Grid(100)
        u = GridFunction(g, 10.0 * (g.x - 0.4) * (g.x - 0.6))
        a, multiple = find_root_a(u, id_thresholds(), 0.0)
        assert multiple
        assert a == pytest.approx(0.4, abs=1e-10)

    def test_scan_starts_at_b_prev(self):
        g = Grid(100)
        u = GridFunction(g, 10.0 * (g.x - 0.4) * (g.x - 0.6))
        a, multiple = find_root_a(u, id_thresholds(), 0.5)
        assert not multiple
        assert a == pytest.approx(0.6, abs=1e-10)


class TestRunningMax:
    def test_paper_sequence(self):
        trace = FreeBoundaryTrace()
        for t, a in enumerate([0.3, 0.5, 0.4, 0.6]):
            update_running_max(trace, float(t), a)
        assert trace.b_values == [0.3, 0.5, 0.5, 0.6]

    def test_constant(self):
        trace = FreeBoundaryTrace()
        for t in range(4):
            update_running_max(trace, float(t), 0.25)
        assert trace.b_values == [0.25] * 4

    def test_strictly_increasing(self):
        trace = FreeBoundaryTrace()
        a_vals = [0.1, 0.2, 0.3, 0.4]
        for t, a in enumerate(a_vals):
            update_running_max(trace, float(t), a)
        assert trace.b_values == a_vals

    def test_non_monotone_time_rejected(self):
        trace = FreeBoundaryTrace()
        update_running_max(trace, 1.0, 0.2)
        with pytest.raises(ValueError):
            update_running_max(trace, 1.0, 0.3)

    def test_b_recomputable_from_a(self):
        rng = np.random.default_rng(0)
        trace = FreeBoundaryTrace()
        a_vals = rng.uniform(0, 1, size=50)
        for t, a in enumerate(a_vals):
            update_running_max(trace, float(t), float(a))
        assert trace.b_values == list(np.maximum.accumulate(a_vals))
        assert all(b2 >= b1 for b1, b2 in
                   zip(trace.b_values, trace.b_values[1:]))


class TestTopology:
    def test_prefix_suffix(self):
        ok, j = check_topology(np.array([1, 1, -1, -1]))
        assert (ok, j) == (True, 1)

    def test_alternating_broken(self):
        ok, j = check_topology(np.array([1, -1, 1, -1]))
        assert not ok

    def test_all_plus_degenerate(self):
        ok, j = check_topology(np.array([1, 1, 1, 1]))
        assert (ok, j) == (True, 3)

    def test_all_minus(self):
        ok, j = check_topology(np.array([-1, -1]))
        assert (ok, j) == (True, -1)

    def test_refinement_invariance(self):
        """Re-classifying the interpolated profile on a finer grid keeps
        the single-interface pattern (gamma_alpha <= 0 forces +1 on the
        left of the root)."""
        thr = id_thresholds()
        for n in (40, 80, 160):
            g = Grid(n)
            u = GridFunction(g, g.x - 0.53)
            xi = np.where(np.asarray(thr.gamma_alpha(u.values)) <= 0, 1, -1)
            ok, j = check_topology(xi)
            assert ok
            assert abs(g.x[j] - 0.53) <= g.h


def _state(grid, values, xi):
    return SimpleNamespace(u=GridFunction(grid, values), xi=xi)


class TestTransversality:
    def test_unit_slope(self):
        g = Grid(100)
        vals = g.x - 0.4
        xi = np.where(vals <= 0, 1, -1)
        report = check_transversality(_state(g, vals, xi), id_thresholds())
        assert report.is_transverse
        assert report.margin == pytest.approx(1.0, rel=1e-9)

    def test_flat_tangency_not_transverse(self):
        g = Grid(100)
        vals = (g.x - 0.5) ** 2
        xi = np.where(g.x <= 0.5, 1, -1)
        report = check_transversality(_state(g, vals, xi), id_thresholds())
        assert not report.is_transverse

    def test_clear_profile_vacuous(self):
        g = Grid(100)
        vals = np.full(101, 5.0)
        xi = np.where(g.x <= 0.5, 1, -1)
        report = check_transversality(_state(g, vals, xi), id_thresholds())
        assert report.is_transverse
        assert math.isinf(report.margin)

    def test_broken_topology_rejected(self):
        g = Grid(16)
        xi = np.array([1, -1] * 8 + [1])
        with pytest.raises(ValueError):
            check_transversality(_state(g, np.zeros(17), xi), id_thresholds())


def reference_initial(n=200):
    grid = Grid(n)
    x = grid.x
    phi = np.stack([1.5 - 0.6 * np.tanh((x - 0.5) / 0.15),
                    np.full_like(x, 2.0)], axis=1)
    psi = np.full((grid.npts, 1), 0.1)
    return SimpleNamespace(phi=GridFunction(grid, phi),
                           psi=GridFunction(grid, psi), b_bar=0.5)


class TestEstimateEm:
    def test_reference_pin(self):
        """Regression pin of the reference data's index at n = 200 (the
        norm clause uses the discrete surrogate at this grid)."""
        model = builtin_bacteria_model()
        assert estimate_Em(reference_initial(200), model) == 10

    def test_interface_too_close_to_edge(self):
        model = builtin_bacteria_model()
        init = reference_initial()
        init = SimpleNamespace(phi=init.phi, psi=init.psi, b_bar=1e-9)
        assert math.isinf(estimate_Em(init, model, m_max=10**6))

    def test_scaling_psi_up_increases_m(self):
        model = builtin_bacteria_model()
        base = reference_initial()
        m0 = estimate_Em(base, model)
        big = SimpleNamespace(phi=base.phi,
                              psi=GridFunction(base.phi.grid,
                                               base.psi.values * 1e3),
                              b_bar=base.b_bar)
        assert estimate_Em(big, model) > m0

    def test_antitone_under_data_improvement(self):
        model = builtin_bacteria_model()
        base = reference_initial()
        m0 = estimate_Em(base, model)
        smaller = SimpleNamespace(phi=base.phi,
                                  psi=GridFunction(base.phi.grid,
                                                   base.psi.values * 0.5),
                                  b_bar=base.b_bar)
        assert estimate_Em(smaller, model) <= m0


class TestDissipativity:
    def test_bacteria_nonstrict(self):
        """Both branch faces report margin 0 (the off branch kills f, the
        growth term vanishes at v = 0): non-strict, not outward."""
        model = builtin_bacteria_model()
        report = validate_dissipativity(model, sample_count=200)
        summary = report["summary"]
        assert summary.status == "warn"
        assert summary.details["min_inward_margin"] == pytest.approx(0.0,
                                                                     abs=1e-12)

    def test_zero_reaction_nonstrict(self):
        spec = make_model(k=1, l=1, m=1, diffusion=[0.1], f=["0"], g=["0"],
                          gamma_alpha="1 - u1", gamma_beta="u1 + 1",
                          w_plus=["1"], w_minus=["0"],
                          u_box=np.array([[-0.5, 0.5]]),
                          v_box=np.array([[0.0, 1.0]]))
        report = validate_dissipativity(spec, sample_count=100)
        assert report["summary"].status == "warn"
        assert report["summary"].details["min_inward_margin"] == 0.0

    def test_growth_envelope_fit(self):
        """|g| = a lambda |v| at the active branch: A = a*lambda, B = 0."""
        model = builtin_bacteria_model()
        report = validate_dissipativity(model, sample_count=400)
        fit = report["growth_bound"].details
        assert fit["A"] == pytest.approx(1.0, rel=0.05)
        assert fit["B"] == pytest.approx(0.0, abs=1e-9)

    def test_requires_boxes(self):
        spec = make_model(k=1, l=1, m=1, diffusion=[0.1], f=["0"], g=["0"],
                          gamma_alpha="1 - u1", gamma_beta="u1 + 1",
                          w_plus=["1"], w_minus=["0"])
        with pytest.raises(ValueError):
            validate_dissipativity(spec)


class TestHolderQuotient:
    def test_constant_branch_zero(self):
        model = builtin_bacteria_model()
        assert estimate_holder_quotient(model, 1, 0.0, n_pairs=500) == 0.0
        assert estimate_holder_quotient(model, -1, 0.3, n_pairs=500) == 0.0

    def test_coordinate_branch_lipschitz_constant(self):
        """W_plus(u) = u1 with sigma = 0 reduces to the empirical Lipschitz
        constant sup |u1 - u1'| / |u - u'| = 1."""
        spec = make_model(k=2, l=1, m=1, diffusion=[0.1, 0.1],
                          f=["0", "0"], g=["0"],
                          gamma_alpha="-u1 + 1/u2 + 1",
                          gamma_beta="u1 - 0.5/u2 - 0.5",
                          w_plus=["u1"], w_minus=["0"],
                          u_box=np.array([[0.2, 4.0], [0.5, 4.0]]),
                          v_box=np.array([[0.0, 1.0]]),
                          u_lower=np.array([0.0, 1e-6]))
        k_est = estimate_holder_quotient(spec, 1, 0.0, n_pairs=4000)
        assert k_est == pytest.approx(1.0, rel=0.05)

    @staticmethod
    def _powerlaw_model(expo):
        gb = "u1 - 0.5/u2 - 0.5"
        return make_model(k=2, l=1, m=1, diffusion=[0.1, 0.1],
                          f=["0", "0"], g=["0"],
                          gamma_alpha="-u1 + 1/u2 + 1", gamma_beta=gb,
                          w_plus=[f"({gb})^{expo}"], w_minus=["0"],
                          u_box=np.array([[0.6, 4.0], [0.5, 4.0]]),
                          v_box=np.array([[0.0, 1.0]]),
                          u_lower=np.array([0.0, 1e-6]))

    def test_powerlaw_divergence(self):
        """W = gamma^(1 - s~): for s~ > sigma the quotient grows without
        bound as the sampling densifies toward the manifold; for s~ <= sigma
        it stabilizes."""
        diverging = self._powerlaw_model(0.5)   # s~ = 0.5 > sigma = 0.3
        ks = [estimate_holder_quotient(diverging, 1, 0.3, n_pairs=1000,
                                       seed=1, near_scale=scale)
              for scale in (1e-3, 1e-4, 1e-5)]
        assert ks[-1] > 2.0 * ks[0]

        stable = self._powerlaw_model(0.7)      # s~ = 0.3 <= sigma = 0.3
        ks = [estimate_holder_quotient(stable, 1, 0.3, n_pairs=1000, seed=1,
                                       near_scale=scale)
              for scale in (1e-3, 1e-4, 1e-5)]
        assert ks[-1] <= 1.5 * ks[0]


class TestConserved:
    def test_constant_field(self):
        g = Grid(20)
        state = SimpleNamespace(u=GridFunction(g, np.full((21, 2), 2.0)),
                                v=GridFunction(g, np.zeros((21, 1))))
        model = builtin_bacteria_model()
        vals = conserved_quantities(state, model,
                                    [(np.array([1.0, 0.0]), np.array([0.0]))])
        assert vals[0] == pytest.approx(2.0, abs=1e-14)

    def test_zero_combo(self):
        g = Grid(20)
        state = SimpleNamespace(u=GridFunction(g, np.ones((21, 2))),
                                v=GridFunction(g, np.ones((21, 1))))
        model = builtin_bacteria_model()
        vals = conserved_quantities(state, model,
                                    [(np.zeros(2), np.zeros(1))])
        assert vals[0] == 0.0

    def test_dimension_mismatch(self):
        g = Grid(20)
        state = SimpleNamespace(u=GridFunction(g, np.ones((21, 2))),
                                v=GridFunction(g, np.ones((21, 1))))
        model = builtin_bacteria_model()
        with pytest.raises(ValueError):
            conserved_quantities(state, model, [(np.zeros(3), np.zeros(1))])


class TestEmSearchEquivalence:
    def test_matches_linear_scan(self):
        """The threshold-enumeration search returns exactly the smallest m
        found by a brute-force upward scan."""
        import rdhyst.freeboundary as fb
        from rdhyst.norms import sobolev_fractional_norm

        model = builtin_bacteria_model()
        thr = model.thresholds
        rng = np.random.default_rng(99)

        def brute(init, m_cap=4000):
            phi, psi, b_bar = init.phi, init.psi, float(init.b_bar)
            x = phi.grid.x
            gb = np.asarray(thr.gamma_beta(phi.values), dtype=float)
            ga = np.asarray(thr.gamma_alpha(phi.values), dtype=float)
            slope = fb.directional_derivative(phi, thr)
            norm_phi = sobolev_fractional_norm(phi, 1.5, 4)
            sup_psi = float(np.abs(psi.values).max())
            for m in range(2, m_cap):
                if fb._em_clauses(b_bar, x, gb, ga, slope, norm_phi,
                                  sup_psi, m):
                    return m
            return math.inf

        for _ in range(12):
            n = int(rng.choice([50, 100]))
            g = Grid(n)
            x = g.x
            b_bar = float(rng.uniform(0.2, 0.8))
            width = float(rng.uniform(0.05, 0.4))
            amp = float(rng.uniform(0.1, 1.2))
            u2 = float(rng.uniform(1.0, 3.0))
            phi1 = 1.0 / u2 + 1.0 - amp * np.tanh((x - b_bar) / width) \
                + float(rng.uniform(0, 0.05))
            phi = np.stack([phi1, np.full_like(x, u2)], axis=1)
            psi = np.full((n + 1, 1), float(rng.uniform(0.01, 3.0)))
            init = SimpleNamespace(phi=GridFunction(g, phi),
                                   psi=GridFunction(g, psi), b_bar=b_bar)
            assert estimate_Em(init, model, m_max=4000) == brute(init)
