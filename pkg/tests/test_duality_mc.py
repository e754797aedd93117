import math

import numpy as np
import pytest
from scipy.stats import norm

from dualflow.coefficients import constant, dual_transform, tanh_drift
from dualflow.duality_mc import (
    MCEstimate,
    TestFunction,
    bm_absorbed_tail,
    estimate_dual_expectation,
    estimate_reflected_expectation,
    estimate_tail_prob,
    estimate_tail_probs,
    fit_rate,
    gronwall_bound_check,
    inverse_expectation_identity,
    reflected_bm_expectation,
    seesaw_mismatches,
    siegmund_check,
    strong_error_bound_check,
    weak_error_identity_check,
    weak_rate_fit,
    zero_occupation_check,
)
from dualflow.monotone_fn import MonotoneFn
from dualflow.noise import TimeGrid
from dualflow.properties import random_monotone

BM = constant(1.0, 0.0)
F = TestFunction(2.0)


class TestEstimate:
    def test_merge_matches_pooled(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=300), rng.normal(1.0, 2.0, size=500)
        m = MCEstimate.from_samples(a).merge(MCEstimate.from_samples(b))
        ref = MCEstimate.from_samples(np.concatenate([a, b]))
        assert m.mean == pytest.approx(ref.mean) and m.std_err == pytest.approx(ref.std_err)

    def test_z(self):
        assert MCEstimate(1.0, 0.5, 10).z_against(0.0) == 2.0
        assert MCEstimate(1.0, 0.0, 10).z_against(1.0) == 0.0


class TestOracles:
    def test_tail_value(self):
        assert bm_absorbed_tail(0.5, 0.5, 1.0) == pytest.approx(norm.cdf(0) - norm.cdf(-1), abs=1e-12)
        assert bm_absorbed_tail(0.5, 0.5, 1.0) == pytest.approx(0.3413447, abs=1e-7)

    def test_tail_limits(self):
        assert bm_absorbed_tail(1e-12, 0.5, 1.0) == pytest.approx(0.0, abs=1e-10)
        assert bm_absorbed_tail(0.7, 1e-12, 1.0) == pytest.approx(2 * norm.cdf(0.7) - 1, abs=1e-10)

    def test_bump(self):
        assert F(1.0) == pytest.approx(1.0)
        assert F(np.array([-1.0, 0.0, 2.0, 3.0])).tolist() == [0, 0, 0, 0]
        u = np.linspace(0.01, 1.99, 50)
        np.testing.assert_allclose(F.prime(u), (F(u + 1e-6) - F(u - 1e-6)) / 2e-6, atol=1e-6)

    def test_reflected_expectation_matches_mc(self):
        rng = np.random.default_rng(1)
        w = np.abs(0.5 + rng.normal(size=400_000))
        assert reflected_bm_expectation(F, 0.5, 1.0) == pytest.approx(F(w).mean(), abs=4e-3)


class TestTail:
    def test_zero_start(self):
        assert estimate_tail_prob(BM, 0.5, 0.0, TimeGrid(1.0, 8), n_samples=10).mean == 0.0

    def test_short_horizon(self):
        g = TimeGrid(1e-3, 4)
        est = estimate_tail_prob(BM, 0.1, 1.0, g, n_samples=2000, seed=1)
        assert abs(est.z_against(bm_absorbed_tail(0.1, 1.0, 1e-3))) <= 4 or est.mean == 1.0

    def test_reference_oracle(self):
        g = TimeGrid(1.0, 64)
        est = estimate_tail_prob(BM, 0.5, 1.0, g, "reference", n_samples=5000, seed=3, r=4)
        assert abs(est.z_against(bm_absorbed_tail(1.0, 0.5, 1.0))) <= 4

    def test_worker_independent(self):
        g = TimeGrid(1.0, 16)
        a = estimate_tail_prob(BM, 0.5, 0.5, g, n_samples=5000, seed=2, workers=1)
        b = estimate_tail_prob(BM, 0.5, 0.5, g, n_samples=5000, seed=2, workers=3)
        assert a == b


class TestDualExpectation:
    def test_zero_f(self):
        est = estimate_dual_expectation(BM, lambda u: 0 * u, 0.5, TimeGrid(1.0, 8), n_samples=100)
        assert est.mean == 0.0 and est.std_err == 0.0

    @pytest.mark.parametrize("b", [0.0, 0.5, -0.5])
    def test_equals_reflected(self, b):
        m = constant(1.0, b)
        g = TimeGrid(1.0, 16)
        a = estimate_dual_expectation(m, F, 0.5, g, n_samples=3000, seed=4)
        c = estimate_reflected_expectation(dual_transform(m), F, 0.5, g, n_samples=3000, seed=4)
        assert abs(a.mean - c.mean) <= 1e-12

    def test_reflected_bm_oracle(self):
        g = TimeGrid(1.0, 64)
        est = estimate_dual_expectation(BM, F, 0.5, g, n_samples=20_000, seed=5,
                                        scheme="reference", r=6)
        assert abs(est.z_against(reflected_bm_expectation(F, 0.5, 1.0))) <= 4


class TestSiegmund:
    def test_structural_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            f = random_monotone(rng)
            # ties f(x) = y have probability zero for continuously drawn levels
            xs, ys = rng.uniform(0, 3, 30), rng.uniform(0, 3, 30)
            assert seesaw_mismatches(f, xs, ys) == 0

    def test_single_pair(self):
        res = siegmund_check(BM, [(0.5, 0.5)], TimeGrid(1.0, 32), 10_000, seed=6)
        assert res[0].passed

    def test_joint(self):
        res = siegmund_check(BM, [(0.25, 0.5), (0.5, 0.25)], TimeGrid(1.0, 32), 10_000,
                             seed=7, joint=True)
        assert len(res) == 1 and res[0].passed


class TestIdentity:
    def test_deterministic_identity_ensemble(self):
        n_nodes = 20001
        lhs, rhs = inverse_expectation_identity([MonotoneFn.identity()], F, 0.7, n_nodes=n_nodes)
        assert lhs.mean == pytest.approx(float(F(0.7)))
        # trapezoid rule on a step indicator: error at most one node spacing times max|f'|
        h = F.R / (n_nodes - 1)
        assert rhs.mean == pytest.approx(float(F(0.7)), abs=h * 2.0)

    def test_random_ensemble(self):
        rng = np.random.default_rng(8)
        ens = [random_monotone(rng) for _ in range(1000)]
        lhs, rhs = inverse_expectation_identity(ens, F, 0.6, n_nodes=4000)
        assert abs(lhs.mean - rhs.mean) <= 4 * math.hypot(lhs.std_err, rhs.std_err) + 1e-3

    def test_zero_f(self):
        zero = TestFunction(2.0, 0.0)
        rep = weak_error_identity_check(BM, zero, 0.5, 1.0, 8, 200, seed=1, r=2)
        assert rep.lhs.mean == 0.0 and rep.rhs.mean == 0.0

    def test_same_resolution_is_zero(self):
        rep = weak_error_identity_check(BM, F, 0.5, 1.0, 8, 200, seed=1, r=0)
        assert rep.lhs.mean == 0.0 and rep.rhs.mean == 0.0

    def test_small_run(self):
        rep = weak_error_identity_check(BM, F, 0.5, 1.0, 8, 5000, seed=2, r=4)
        assert rep.passed and not rep.conditional


class TestRate:
    def test_fit_exact(self):
        ns = [4, 8, 16, 32, 64]
        assert fit_rate(ns, [3.0 * n ** -0.5 for n in ns]) == pytest.approx(-0.5, abs=1e-12)

    def test_ci_shrinks(self):
        ns = [4, 8, 16, 32]
        ex = reflected_bm_expectation(F, 0.5, 1.0)
        a = weak_rate_fit(BM, F, 0.5, 1.0, ns, 4000, seed=3, exact=ex, n_boot=200)
        b = weak_rate_fit(BM, F, 0.5, 1.0, ns, 8000, seed=3, exact=ex, n_boot=200)
        wa, wb = a.ci[1] - a.ci[0], b.ci[1] - b.ci[0]
        assert 0.5 < wb / wa < 0.9

    def test_rejects_non_dyadic(self):
        with pytest.raises(ValueError):
            weak_rate_fit(BM, F, 0.5, 1.0, [4, 8, 12, 16], 100)


class TestStrong:
    def test_r0_trivial(self):
        rep = strong_error_bound_check(BM, 1.0, 1.0, 8, 20, seed=0, r=0)
        assert np.all(rep.lhs == 0) and np.all(rep.rhs == 0)

    def test_gronwall_brownian_factor(self):
        rep = gronwall_bound_check(BM, 1.0, 1.0, 16, 0.0, 100, seed=0, r=3)
        assert np.all(rep.factor == 2.0) and rep.passed

    def test_gronwall_needs_constant_sigma(self):
        from dualflow.coefficients import affine_affine
        with pytest.raises(ValueError):
            gronwall_bound_check(affine_affine(0.5, 1.0), 1.0, 1.0, 8, 0.0, 10)

    def test_small_tanh_run(self):
        rep = strong_error_bound_check(tanh_drift(1.0, 1.0, 3.0), 1.0, 1.0, 32, 100, seed=1, r=4)
        assert rep.passed and rep.expectation_holds


class TestZeroOccupation:
    def test_cannot_reach_zero(self):
        est = zero_occupation_check(BM, 0.01, TimeGrid(1.0, 100), 500, seed=0, x0=5.0)
        assert est.mean == 0.0

    def test_trend(self):
        freqs = [zero_occupation_check(BM, 1.0, TimeGrid(1.0, n), 4000, seed=0).mean
                 for n in (8, 32, 128)]
        assert freqs[0] > freqs[1] > freqs[2]
        assert freqs[2] < 0.2


def test_batched_tail_matches_single():
    g = TimeGrid(1.0, 16)
    many = estimate_tail_probs(BM, [(0.5, 0.5), (0.25, 1.0)], g, n_samples=3000, seed=9)
    one = estimate_tail_prob(BM, 0.25, 1.0, g, n_samples=3000, seed=9)
    assert many[1] == one
