from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualflow.monotone_fn import (
    InverseUndefinedError,
    MonotoneFn,
    compose,
    eval_fn,
    flat_image_set,
    jump_set,
    left_limit,
    levy_metric,
    rd_condition,
    right_inverse_at,
    right_inverse_fn,
    sup_metric,
    truncate_min,
)
from dualflow.properties import (
    brute_force_levy,
    check_inverse_properties,
    check_inverse_regularity,
    check_seesaw,
    check_sup_le_levy,
    check_sup_le_levy_interior,
    inverse_regularity_sides,
    probe_levels,
    random_monotone,
    random_pair,
)

ID = MonotoneFn.identity()
# 0 on [0, 1), then 3 + (x - 1)
STEP = MonotoneFn([0.0, 1.0], [0.0, 3.0], [0.0], 1.0)


def brute_inverse(f, z, hi=10.0, step=1e-6):
    ys = np.arange(0.0, hi, step)
    vals = np.asarray(f(ys))
    return ys[np.argmax(vals > z)]


class TestEval:
    def test_identity(self):
        assert eval_fn(ID, 3.5) == 3.5

    def test_right_continuous_at_knot(self):
        assert eval_fn(STEP, 1.0) == 3.0
        assert eval_fn(STEP, 0.999) == 0.0

    def test_left_limit(self):
        assert left_limit(ID, 2.0) == 2.0
        assert left_limit(STEP, 1.0) == 0.0

    def test_left_limit_at_zero_is_zero(self):
        f = MonotoneFn.affine(1.0, 2.0)
        assert left_limit(f, 0.0) == 0.0
        assert 0.0 in jump_set(f)
        assert 0.0 not in jump_set(ID)

    def test_rejects_decreasing(self):
        with pytest.raises(ValueError):
            MonotoneFn([0.0, 1.0], [2.0, 1.0], [0.0], 1.0)

    def test_record_roundtrip(self):
        f = random_monotone(np.random.default_rng(3))
        g = MonotoneFn.from_record(f.to_record())
        xs = np.linspace(0, 5, 101)
        np.testing.assert_array_equal(f(xs), g(xs))


class TestInverse:
    def test_simple(self):
        assert right_inverse_at(ID, 0.7) == 0.7
        assert right_inverse_at(MonotoneFn.affine(2.0), 1.0) == 0.5

    def test_step_against_brute_scan(self):
        for z, want in ((0.0, 1.0), (3.5, 1.5)):
            got = right_inverse_at(STEP, z)
            assert got == pytest.approx(want, abs=1e-12)
            assert abs(brute_inverse(STEP, z) - got) <= 2e-6

    def test_undefined_inverse(self):
        with pytest.raises(InverseUndefinedError):
            right_inverse_fn(MonotoneFn.constant(1.0))

    def test_inverse_fn(self):
        xs = np.linspace(0, 4, 41)
        np.testing.assert_allclose(right_inverse_fn(ID)(xs), xs)
        np.testing.assert_allclose(right_inverse_fn(MonotoneFn.affine(2.0))(xs), xs / 2)

    def test_double_inversion(self):
        # flat at 0 on [0, 0.5], then strictly increasing and continuous
        f = MonotoneFn([0.0, 0.5, 2.0], [0.0, 0.0, 3.0], [0.0, 2.0], 0.5)
        ff = right_inverse_fn(right_inverse_fn(f))
        xs = np.random.default_rng(0).uniform(0, 10, 1000)
        np.testing.assert_allclose(ff(xs), f(xs), atol=1e-12)

    def test_inverse_fn_matches_pointwise(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            f = random_monotone(rng)
            fi = right_inverse_fn(f)
            zs = probe_levels(f, rng=rng)
            np.testing.assert_allclose(fi(zs), right_inverse_at(f, zs), atol=1e-9)


class TestCompose:
    def test_examples(self):
        psi = MonotoneFn.affine(1.0, 1.0)
        xs = np.linspace(0, 3, 31)
        np.testing.assert_allclose(compose(ID, psi)(xs), psi(xs))
        assert eval_fn(compose(MonotoneFn.affine(2.0), psi), 1.0) == 4.0

    def test_random_pairs_pointwise(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            phi, psi = random_pair(rng)
            xs = rng.uniform(0, 6, 1000)
            np.testing.assert_allclose(compose(phi, psi)(xs), phi(psi(xs)), atol=1e-9)

    def test_exact_pairs(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            phi, psi = random_pair(rng, exact=True)
            for x in (Fraction(0), Fraction(1, 3), Fraction(7, 4), Fraction(5)):
                assert eval_fn(compose(phi, psi), x) == eval_fn(phi, eval_fn(psi, x))


class TestSets:
    def test_jump_set(self):
        assert jump_set(ID).size == 0
        f = MonotoneFn([0.0, 1.0], [0.0, 3.0], [0.0], 1.0)
        np.testing.assert_array_equal(jump_set(f), [1.0])

    def test_flat_image_set(self):
        assert flat_image_set(ID).size == 0
        absorbing = MonotoneFn([0.0, 1.0], [0.0, 0.0], [0.0], 1.0)
        np.testing.assert_array_equal(flat_image_set(absorbing), [0.0])
        stair = MonotoneFn([0.0, 1.0, 2.0, 3.0, 4.0], [0.0, 1.0, 2.0, 4.0, 5.0],
                           [1.0, 0.0, 1.0, 0.0], 1.0)
        np.testing.assert_array_equal(flat_image_set(stair), [1.0, 4.0])

    def test_rd_condition(self):
        absorbing = MonotoneFn([0.0, 1.0], [0.0, 0.0], [0.0], 1.0)
        assert rd_condition(absorbing, ID)
        first = MonotoneFn([0.0, 1.0, 2.0], [0.0, 1.0, 1.0], [1.0, 0.0], 1.0)
        second = MonotoneFn([0.0, 1.0], [0.0, 3.0], [1.0], 1.0)
        assert not rd_condition(first, second)
        assert rd_condition(ID, second)


class TestMetrics:
    def test_zero_distance(self):
        f = random_monotone(np.random.default_rng(5))
        assert levy_metric(f, f, 2.0) == 0.0
        assert sup_metric(f, f, 2.0) == 0.0

    @pytest.mark.parametrize("c", [0.1, 0.4, 1.0])
    def test_shifted_identity(self, c):
        g = MonotoneFn.affine(1.0, c)
        assert levy_metric(ID, g, 2.0) == pytest.approx(c / 2, abs=1e-10)
        assert brute_force_levy(ID, g, 2.0) == pytest.approx(c / 2, abs=1e-5)
        assert sup_metric(ID, g, 2.0) == pytest.approx(c)

    def test_levy_matches_brute_force(self):
        rng = np.random.default_rng(6)
        for _ in range(15):
            f, g = random_pair(rng)
            assert abs(levy_metric(f, g, 2.0) - brute_force_levy(f, g, 2.0)) <= 1e-5

    def test_sup_matches_dense_grid(self):
        rng = np.random.default_rng(7)
        K = 2.0
        xs = np.arange(0.0, K + 1e-12, 1e-6)
        for _ in range(5):
            f, g = random_pair(rng)
            dense = np.max(np.abs(f(xs) - g(xs)))
            ks = np.unique(np.concatenate([f.knots, g.knots]).astype(float))
            ks = ks[(ks > 0) & (ks <= K)]
            lim = np.max(np.abs(f.left(ks) - g.left(ks)), initial=0.0)
            lim = max(lim, np.max(np.abs(f(ks) - g(ks)), initial=0.0))
            assert float(sup_metric(f, g, K)) == pytest.approx(max(dense, lim), abs=1e-12)

    def test_truncate_min(self):
        assert eval_fn(truncate_min(ID, 2.0), 5.0) == 2.0
        f = MonotoneFn.affine(0.5)
        xs = np.linspace(0, 3, 31)
        np.testing.assert_array_equal(truncate_min(f, 2.0)(xs), f(xs))
        rng = np.random.default_rng(8)
        for _ in range(20):
            t = truncate_min(random_monotone(rng), 1.5)(np.linspace(0, 6, 200))
            assert np.all(np.diff(t) >= 0) and t.max() <= 1.5


# ---------------------------------------------------------------------------
# property tests


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@settings(max_examples=150, deadline=None)
@given(seed=seeds, exact=st.booleans())
def test_inverse_composition_properties(seed, exact):
    rng = np.random.default_rng(seed)
    phi, psi = random_pair(rng, exact=exact)
    assert check_inverse_properties(phi, psi, probe_levels(phi, psi, rng=rng)) == []


@settings(max_examples=150, deadline=None)
@given(seed=seeds, exact=st.booleans())
def test_seesaw(seed, exact):
    rng = np.random.default_rng(seed)
    phi = random_monotone(rng, exact=exact)
    zs = probe_levels(phi, rng=rng)
    assert check_seesaw(phi, zs, zs) == []


@settings(max_examples=60, deadline=None)
@given(seed=seeds, K=st.sampled_from([0.5, 1.0, 2.0, 3.5]))
def test_levy_below_sup(seed, K):
    phi, psi = random_pair(np.random.default_rng(seed))
    assert levy_metric(phi, psi, K) <= float(sup_metric(phi, psi, K)) + 1e-9


@settings(max_examples=60, deadline=None)
@given(seed=seeds)
def test_sup_below_levy_on_interior(seed):
    rng = np.random.default_rng(seed)
    phi = random_monotone(rng, continuous=True, start_zero=True, strict=True)
    psi = random_monotone(rng)
    assert check_sup_le_levy_interior(phi, psi, 2.0) == []


@settings(max_examples=60, deadline=None)
@given(seed=seeds)
def test_levy_symmetric(seed):
    phi, psi = random_pair(np.random.default_rng(seed))
    assert levy_metric(phi, psi, 2.0) == pytest.approx(levy_metric(psi, phi, 2.0), abs=1e-9)


# ---------------------------------------------------------------------------
# counterexamples to the stated forms of two metric inequalities


def _jump_at_one():
    # identity on [0, 1), jumps to 11 at 1, slope 1 after
    return MonotoneFn([0.0, 1.0], [0.0, 11.0], [1.0], 1.0)


def test_sup_levy_bound_fails_at_window_edge():
    phi, psi, K = ID, _jump_at_one(), 1.05
    rho = levy_metric(phi, psi, K)
    assert rho == pytest.approx(0.05, abs=1e-9)
    assert check_sup_le_levy(phi, psi, K) != []
    assert float(sup_metric(phi, psi, K)) == pytest.approx(10.0)
    # restricted to [0, K - rho] the bound holds
    assert check_sup_le_levy_interior(phi, psi, K) == []


def test_inverse_regularity_fails_with_flat_piece():
    # psi is the identity except for a flat piece at 1 on [1, 11)
    psi = MonotoneFn([0.0, 1.0, 11.0], [0.0, 1.0, 1.0], [1.0, 0.0], 1.0)
    lhs, rhs = inverse_regularity_sides(ID, psi, 1.05)
    assert lhs == pytest.approx(10.0)
    assert rhs == pytest.approx(0.1, abs=1e-9)
    assert check_inverse_regularity(ID, psi, 1.05) != []


def test_inverse_regularity_hand_built_fixtures():
    # strictly increasing, no flat pieces: the bound holds exactly
    phi = MonotoneFn([0.0, 1.0], [0.0, 2.0], [2.0], 1.0)
    psi = MonotoneFn([0.0, 0.5], [0.1, 1.2], [2.2], 1.5)
    lhs, rhs = inverse_regularity_sides(phi, psi, 1.5)
    assert lhs <= rhs + 1e-12
