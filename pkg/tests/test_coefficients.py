import numpy as np
import pytest
from scipy.integrate import quad

from dualflow.coefficients import (
    MissingDerivativeError,
    affine_affine,
    constant,
    custom,
    derivative_mismatch,
    dual_transform,
    feller_integral,
    from_family,
    inverse_drift,
    monotone_step_condition,
    sqrt_diffusion,
    tanh_drift,
)

XS = np.linspace(0.01, 5.0, 50)


class TestDualTransform:
    def test_brownian(self):
        d = dual_transform(constant(1.0, 0.0))
        np.testing.assert_array_equal(d.sigma(XS), 1.0)
        np.testing.assert_array_equal(d.drift(XS), 0.0)

    def test_linear_sigma(self):
        m = custom(lambda x: np.asarray(x, float), lambda x: 0 * np.asarray(x, float),
                   sigma_prime=lambda x: np.ones_like(np.asarray(x, float)),
                   drift_prime=lambda x: 0 * np.asarray(x, float))
        np.testing.assert_allclose(dual_transform(m).drift(XS), XS)

    @pytest.mark.parametrize("g,d", [(0.5, -1.0), (-2.0, 0.3)])
    def test_constant_sigma_affine_drift(self, g, d):
        m = affine_affine(0.0, 2.0, g, d)
        np.testing.assert_allclose(dual_transform(m).drift(XS), -g * XS - d)

    def test_dual_derivative_consistent(self):
        for m in (sqrt_diffusion(0.5, -1.0, -0.2), inverse_drift(0.3, 1.0), tanh_drift(1, 1, 3)):
            assert derivative_mismatch(dual_transform(m)) < 1e-5

    def test_custom_needs_derivatives(self):
        with pytest.raises(MissingDerivativeError):
            custom(lambda x: x, lambda x: x)


class TestFeller:
    def test_brownian_value(self):
        res = feller_integral(constant(1.0, 0.0))
        assert res.finite and res.value == pytest.approx(2.0, abs=1e-6)

    def test_sqrt_diverges(self):
        # sigma = sqrt(2x): 1/sigma^2 = 1/(2x) is not integrable at 0
        assert not feller_integral(sqrt_diffusion(1.0)).finite

    def test_dual_of_negative_drift(self):
        m = constant(1.0, -1.0)
        res = feller_integral(m, "dual")
        assert res.finite
        # integrand e^{-2(1-x)} + e^{2(1-x)} for b_hat = 1
        want = quad(lambda x: np.exp(-2 * (1 - x)) + np.exp(2 * (1 - x)), 0, 1)[0]
        assert res.value == pytest.approx(want, rel=1e-6)

    def test_bad_which(self):
        with pytest.raises(ValueError):
            feller_integral(constant(), "other")


class TestStepCondition:
    @pytest.mark.parametrize("params", [(0.5, 1.0, 0.3, -0.2), (0.0, 1.0, 0.0, 0.0),
                                        (1.0, 0.0, 2.0, -1.0)])
    def test_affine_nonneg(self, params):
        assert monotone_step_condition(affine_affine(*params), 0.01).holds

    def test_inverse_drift(self):
        assert monotone_step_condition(inverse_drift(0.5, 1.0), 0.01).holds

    def test_sqrt_small_dt(self):
        assert monotone_step_condition(sqrt_diffusion(0.5, -1.0, -0.1), 0.01).holds

    def test_fails_with_witness(self):
        # strongly mean-reverting drift with a large step breaks monotonicity
        res = monotone_step_condition(tanh_drift(1.0, 5.0, 3.0), 1.0)
        assert not res.holds

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            monotone_step_condition(constant(), 0.0)


def test_from_family_roundtrip():
    m = from_family("affine_affine", alpha=0.1, beta=1.0, gamma=0.0, delta=-0.5)
    np.testing.assert_allclose(m.drift(XS), -0.5)
    with pytest.raises(ValueError):
        from_family("nope")
