"""Relay hysteresis: region classification, configuration updates, traces.

The scalar test relay has thresholds at u = 1 (forces +1) and u = 0
(forces -1); the planar geometry uses the colony-growth hyperbolas.
"""
import numpy as np
import pytest

from rdhyst.errors import DomainError, ModelError
from rdhyst.relay import (BranchPair, Region, ThresholdPair,
                          advance_configuration, advance_configuration_field,
                          classify_region, evaluate_output,
                          init_configuration, relay_trace)

from _oracles import (bacteria_gammas, oracle_advance, oracle_init,
                      oracle_trace, random_piecewise_linear,
                      scalar_relay_gammas)


def scalar_thresholds():
    ga, gb = scalar_relay_gammas()
    return ThresholdPair(gamma_alpha=ga, gamma_beta=gb,
                         grad_alpha=lambda u: -np.ones_like(u),
                         grad_beta=lambda u: np.ones_like(u), k=1)


def bacteria_thresholds():
    ga, gb = bacteria_gammas()
    return ThresholdPair(gamma_alpha=ga, gamma_beta=gb, k=2)


def constant_branches(lam=1.0):
    return BranchPair(w_plus=lambda u: np.full(u.shape[:-1] + (1,), lam),
                      w_minus=lambda u: np.zeros(u.shape[:-1] + (1,)), m=1)


class TestClassify:
    def test_alpha(self):
        assert classify_region(scalar_thresholds(), 1.5) is Region.ALPHA

    def test_alpha_beta(self):
        assert classify_region(scalar_thresholds(), 0.5) is Region.ALPHA_BETA

    def test_on_gamma_beta(self):
        assert classify_region(scalar_thresholds(), 0.0) is Region.ON_GAMMA_BETA

    def test_on_gamma_alpha(self):
        assert classify_region(scalar_thresholds(), 1.0) is Region.ON_GAMMA_ALPHA

    def test_beta(self):
        assert classify_region(scalar_thresholds(), -0.5) is Region.BETA

    def test_disjointness_violation(self):
        bad = ThresholdPair(gamma_alpha=lambda u: u[..., 0] - 1.0,
                            gamma_beta=lambda u: 1.0 - u[..., 0], k=1)
        with pytest.raises(ModelError):
            classify_region(bad, 1.0)


class TestInit:
    def test_forced_plus(self):
        assert init_configuration(scalar_thresholds(), -1, 1.5) == 1

    def test_memory_keeps_zeta0(self):
        assert init_configuration(scalar_thresholds(), -1, 0.5) == -1
        assert init_configuration(scalar_thresholds(), 1, 0.5) == 1

    def test_forced_minus(self):
        assert init_configuration(scalar_thresholds(), 1, -0.2) == -1

    def test_matches_oracle(self):
        ga, gb = scalar_relay_gammas()
        rng = np.random.default_rng(0)
        thr = scalar_thresholds()
        for _ in range(100):
            u0 = np.array([rng.uniform(-1.0, 2.0)])
            zeta0 = rng.choice([-1, 1])
            assert init_configuration(thr, int(zeta0), u0) == \
                oracle_init(ga, gb, int(zeta0), u0)


class TestAdvance:
    def test_cross_on(self):
        assert advance_configuration(scalar_thresholds(), -1,
                                     np.array([0.5]), np.array([1.2])) == 1

    def test_recross_keeps(self):
        assert advance_configuration(scalar_thresholds(), 1,
                                     np.array([1.2]), np.array([0.5])) == 1

    def test_double_crossing_last_wins(self):
        # crosses Gamma_beta (u=0) going down is impossible on an upward
        # segment; -0.5 -> 1.5 crosses u=0 then u=1; the later hit is
        # Gamma_alpha (value frozen from the fine-sampling rule)
        assert advance_configuration(scalar_thresholds(), -1,
                                     np.array([-0.5]), np.array([1.5])) == 1

    def test_downward_double_crossing(self):
        assert advance_configuration(scalar_thresholds(), 1,
                                     np.array([1.5]), np.array([-0.5])) == -1

    def test_no_crossing_keeps(self):
        assert advance_configuration(scalar_thresholds(), -1,
                                     np.array([0.2]), np.array([0.8])) == -1

    def test_consistency_after_advance(self):
        """After any update, the configuration is the forced one whenever
        the endpoint lies in M_alpha or M_beta."""
        thr = scalar_thresholds()
        rng = np.random.default_rng(1)
        for _ in range(300):
            u0 = np.array([rng.uniform(-1.0, 2.0)])
            u1 = np.array([rng.uniform(-1.0, 2.0)])
            zeta = int(rng.choice([-1, 1]))
            if init_configuration(thr, zeta, u0) != zeta:
                continue
            out = advance_configuration(thr, zeta, u0, u1)
            if u1[0] >= 1.0:
                assert out == 1
            elif u1[0] <= 0.0:
                assert out == -1

    def test_simultaneous_crossing_is_model_error(self):
        # gammas vanish at the same point: not disjoint along the path
        bad = ThresholdPair(gamma_alpha=lambda u: 1.0 - u[..., 0],
                            gamma_beta=lambda u: u[..., 0] - 1.0, k=1)
        with pytest.raises(ModelError):
            advance_configuration(bad, 1, np.array([0.5]), np.array([1.5]))

    def test_exact_zero_endpoint_forces(self):
        # landing exactly on Gamma_alpha flips even without a sign change
        assert advance_configuration(scalar_thresholds(), -1,
                                     np.array([0.5]), np.array([1.0])) == 1

    def test_prefilter_matches_full_scan(self):
        thr = bacteria_thresholds()
        rng = np.random.default_rng(5)
        for _ in range(50):
            pts = random_piecewise_linear(rng, 2, n_breaks=2)
            zeta = np.array([rng.choice([-1, 1])], dtype=np.int8)
            full, _ = advance_configuration_field(
                thr, zeta, pts[0][None], pts[1][None], prefilter=False)
            fast, _ = advance_configuration_field(
                thr, zeta, pts[0][None], pts[1][None], prefilter=True)
            assert full[0] == fast[0]


class TestEvaluateOutput:
    def test_active_branch(self):
        w = evaluate_output(bacteria_thresholds(), constant_branches(), 1,
                            np.array([3.0, 1.0]))
        assert w[0] == 1.0

    def test_inactive_branch_is_zero(self):
        # the off branch is identically zero on its whole domain
        w = evaluate_output(bacteria_thresholds(), constant_branches(), -1,
                            np.array([1.0, 1.0]))
        assert w[0] == 0.0

    def test_minus_branch_domain_violation(self):
        # (3, 1) lies in M_alpha, outside the domain of the off branch
        with pytest.raises(DomainError) as err:
            evaluate_output(bacteria_thresholds(), constant_branches(), -1,
                            np.array([3.0, 1.0]))
        assert "W_-1" in str(err.value)

    def test_domain_violation(self):
        # gamma_beta(u) < 0 puts u outside the +1 branch domain
        with pytest.raises(DomainError) as err:
            evaluate_output(bacteria_thresholds(), constant_branches(), 1,
                            np.array([0.1, 1.0]))
        assert "W_+1" in str(err.value)


class TestTrace:
    def test_constant_input(self):
        thr = scalar_thresholds()
        out = relay_trace(thr, constant_branches(), -1,
                          [(t, np.array([0.5])) for t in (0.0, 1.0, 2.0)])
        assert [z for _, z, _ in out] == [-1, -1, -1]
        assert all(w[0] == 0.0 for _, _, w in out)

    def test_triangular_wave(self):
        """0.5 -> 1.5 -> -0.5 -> 1.5 switches on, off, on (frozen from the
        fine-sampling oracle)."""
        thr = scalar_thresholds()
        samples = [(float(i), np.array([u]))
                   for i, u in enumerate((0.5, 1.5, -0.5, 1.5))]
        out = relay_trace(thr, constant_branches(), -1, samples)
        assert [z for _, z, _ in out] == [-1, 1, -1, 1]
        assert [w[0] for _, _, w in out] == [0.0, 1.0, 0.0, 1.0]

    def test_rate_independence(self):
        """Reparametrizing time leaves (zeta, w) at corresponding samples
        exactly unchanged."""
        thr = scalar_thresholds()
        rng = np.random.default_rng(2)
        values = rng.uniform(-1.0, 2.0, size=10)
        t1 = np.arange(10.0)
        t2 = np.cumsum(rng.uniform(0.1, 3.0, size=10))
        out1 = relay_trace(thr, constant_branches(), -1,
                           list(zip(t1, values[:, None])))
        out2 = relay_trace(thr, constant_branches(), -1,
                           list(zip(t2, values[:, None])))
        assert [z for _, z, _ in out1] == [z for _, z, _ in out2]
        assert [w[0] for _, _, w in out1] == [w[0] for _, _, w in out2]

    def test_semigroup(self):
        """Splitting the trace at any sample and restarting from the
        intermediate configuration reproduces the full trace."""
        thr = scalar_thresholds()
        rng = np.random.default_rng(3)
        values = rng.uniform(-1.0, 2.0, size=12)
        samples = [(float(i), np.array([u])) for i, u in enumerate(values)]
        full = relay_trace(thr, constant_branches(), -1, samples)
        for split in (1, 5, 10):
            head = relay_trace(thr, constant_branches(), -1, samples[:split])
            zeta_mid = head[-1][1]
            tail = relay_trace(thr, constant_branches(), zeta_mid,
                               samples[split - 1:])
            assert [z for _, z, _ in head[:-1]] + [z for _, z, _ in tail] == \
                [z for _, z, _ in full]

    def test_unordered_times_rejected(self):
        thr = scalar_thresholds()
        with pytest.raises(ValueError):
            relay_trace(thr, constant_branches(), -1,
                        [(1.0, np.array([0.5])), (0.5, np.array([0.6]))])


class TestOracleEquivalence:
    @pytest.mark.parametrize("kdim", [1, 2])
    def test_random_polylines(self, kdim):
        """Coarse segment updates equal the dense-sampling oracle (smoke
        version; the full 1000-input sweep is an acceptance criterion)."""
        if kdim == 1:
            ga, gb = scalar_relay_gammas()
            thr = scalar_thresholds()
        else:
            ga, gb = bacteria_gammas()
            thr = bacteria_thresholds()
        rng = np.random.default_rng(11 + kdim)
        mismatches = 0
        for _ in range(60):
            pts = random_piecewise_linear(rng, kdim)
            zeta0 = int(rng.choice([-1, 1]))
            expected = oracle_trace(ga, gb, zeta0, pts, substeps=10**4)
            got = relay_trace(thr, constant_branches(), zeta0,
                              [(float(i), p) for i, p in enumerate(pts)])
            for seg, (want, (_, have, _)) in enumerate(zip(expected, got)):
                if want != have:
                    _, info = oracle_advance(ga, gb, expected[seg - 1],
                                             pts[seg - 1], pts[seg])
                    assert info["boundary"] or info["tie"], (
                        f"mismatch not excused at segment {seg}")
                    mismatches += 1
        assert mismatches <= 2
