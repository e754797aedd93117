"""Coefficient models ``(sigma, b)`` on ``(0, inf)`` and their duals.

Built-in families::

    affine_affine    sigma = alpha*x + beta,  b = gamma*x + delta
    constant         sigma = s,               b = c
    sqrt_diffusion   sigma = sqrt(2*a*x),     b = c*x + d
    inverse_drift    sigma = alpha*x + beta,  b = -1/x
    tanh_drift       sigma = s,               b = -kappa*cap*tanh(x/cap)

``custom`` models take user supplied callables, derivatives included.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

__all__ = [
    "CoefficientModel",
    "DualCoefficients",
    "BoundaryIntegral",
    "StepCondition",
    "affine_affine",
    "constant",
    "sqrt_diffusion",
    "inverse_drift",
    "tanh_drift",
    "custom",
    "from_family",
    "dual_transform",
    "feller_integral",
    "monotone_step_condition",
    "derivative_mismatch",
    "FAMILIES",
]

Fn = Callable[[np.ndarray], np.ndarray]


class MissingDerivativeError(ValueError):
    pass


@dataclass(frozen=True)
class CoefficientModel:
    """Diffusion ``sigma`` and drift ``b`` with their first derivatives.

    All callables are vectorised over numpy arrays of states ``x > 0``.
    ``sigma_second`` is optional and only used to differentiate the dual drift.
    ``affine`` holds ``(alpha, beta, gamma, delta)`` when both coefficients are
    affine, which lets the flow module invert an Euler step in closed form.
    """

    sigma: Fn
    sigma_prime: Fn
    drift: Fn
    drift_prime: Fn
    family_tag: str = "custom"
    params: dict = field(default_factory=dict)
    sigma_second: Optional[Fn] = None
    affine: Optional[tuple] = None

    def __post_init__(self):
        xs = np.geomspace(1e-6, 1e3, 64)
        with np.errstate(all="ignore"):
            s = np.asarray(self.sigma(xs), dtype=float)
        if np.any(~(s > 0)):
            bad = xs[np.argmax(~(s > 0))]
            raise ValueError(f"sigma must be positive on (0, inf); sigma({bad:g}) = "
                             f"{float(np.asarray(self.sigma(np.array([bad])))[0]):g}")

    @property
    def constant_sigma(self) -> Optional[float]:
        if self.affine is not None and self.affine[0] == 0:
            return float(self.affine[1])
        return None

    def describe(self) -> str:
        ps = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.family_tag}({ps})"


@dataclass(frozen=True)
class DualCoefficients(CoefficientModel):
    """``(sigma_hat, b_hat) = (sigma, sigma*sigma' - b)``; built by :func:`dual_transform`."""


def _const(c):
    return lambda x: np.full(np.shape(x), float(c))


def affine_affine(alpha=0.0, beta=1.0, gamma=0.0, delta=0.0) -> CoefficientModel:
    a, bt, g, d = (float(v) for v in (alpha, beta, gamma, delta))
    return CoefficientModel(
        sigma=lambda x: a * np.asarray(x, dtype=float) + bt,
        sigma_prime=_const(a),
        drift=lambda x: g * np.asarray(x, dtype=float) + d,
        drift_prime=_const(g),
        sigma_second=_const(0.0),
        family_tag="affine_affine",
        params=dict(alpha=a, beta=bt, gamma=g, delta=d),
        affine=(a, bt, g, d),
    )


def constant(sigma=1.0, b=0.0) -> CoefficientModel:
    s, c = float(sigma), float(b)
    m = affine_affine(0.0, s, 0.0, c)
    return CoefficientModel(m.sigma, m.sigma_prime, m.drift, m.drift_prime,
                            family_tag="constant", params=dict(sigma=s, b=c),
                            sigma_second=m.sigma_second, affine=m.affine)


def sqrt_diffusion(a=0.5, c=0.0, d=0.0) -> CoefficientModel:
    a, c, d = float(a), float(c), float(d)
    if a <= 0:
        raise ValueError("sqrt_diffusion needs a > 0")
    return CoefficientModel(
        sigma=lambda x: np.sqrt(2 * a * np.asarray(x, dtype=float)),
        sigma_prime=lambda x: a / np.sqrt(2 * a * np.asarray(x, dtype=float)),
        drift=lambda x: c * np.asarray(x, dtype=float) + d,
        drift_prime=_const(c),
        sigma_second=lambda x: -a * a / np.sqrt(2 * a * np.asarray(x, dtype=float)) ** 3,
        family_tag="sqrt_diffusion",
        params=dict(a=a, c=c, d=d),
    )


def inverse_drift(alpha=0.0, beta=1.0) -> CoefficientModel:
    a, bt = float(alpha), float(beta)
    return CoefficientModel(
        sigma=lambda x: a * np.asarray(x, dtype=float) + bt,
        sigma_prime=_const(a),
        drift=lambda x: -1.0 / np.asarray(x, dtype=float),
        drift_prime=lambda x: 1.0 / np.asarray(x, dtype=float) ** 2,
        sigma_second=_const(0.0),
        family_tag="inverse_drift",
        params=dict(alpha=a, beta=bt),
    )


def tanh_drift(sigma=1.0, kappa=1.0, cap=3.0) -> CoefficientModel:
    """Mean-reverting drift ``-kappa*x`` smoothly saturated at ``-kappa*cap``."""
    s, k, cp = float(sigma), float(kappa), float(cap)
    return CoefficientModel(
        sigma=_const(s),
        sigma_prime=_const(0.0),
        drift=lambda x: -k * cp * np.tanh(np.asarray(x, dtype=float) / cp),
        drift_prime=lambda x: -k / np.cosh(np.asarray(x, dtype=float) / cp) ** 2,
        sigma_second=_const(0.0),
        family_tag="tanh_drift",
        params=dict(sigma=s, kappa=k, cap=cp),
    )


def custom(sigma, drift, sigma_prime=None, drift_prime=None, sigma_second=None,
           **params) -> CoefficientModel:
    if sigma_prime is None or drift_prime is None:
        raise MissingDerivativeError("custom models must supply sigma_prime and drift_prime")
    return CoefficientModel(sigma, sigma_prime, drift, drift_prime, family_tag="custom",
                            params=params, sigma_second=sigma_second)


FAMILIES = {
    "affine_affine": affine_affine,
    "constant": constant,
    "sqrt_diffusion": sqrt_diffusion,
    "inverse_drift": inverse_drift,
    "tanh_drift": tanh_drift,
}


def from_family(family: str, **params) -> CoefficientModel:
    try:
        factory = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown model family {family!r}; "
                         f"choose from {sorted(FAMILIES)}") from None
    return factory(**params)


def dual_transform(model: CoefficientModel) -> DualCoefficients:
    """Return ``(sigma, sigma*sigma' - b)`` with the matching derivative fields."""
    if model.sigma_prime is None or model.drift_prime is None:
        raise MissingDerivativeError("dual_transform needs sigma_prime and drift_prime")
    sig, sp, b, bp, s2 = (model.sigma, model.sigma_prime, model.drift,
                          model.drift_prime, model.sigma_second)

    def drift_hat(x):
        return sig(x) * sp(x) - b(x)

    if s2 is not None:
        def drift_hat_prime(x):
            return sp(x) ** 2 + sig(x) * s2(x) - bp(x)
    else:
        def drift_hat_prime(x):
            x = np.asarray(x, dtype=float)
            h = 1e-6 * np.maximum(x, 1e-3)
            return (drift_hat(x + h) - drift_hat(np.maximum(x - h, x / 2))) / (
                x + h - np.maximum(x - h, x / 2))

    aff = None
    if model.affine is not None:
        a, bt, g, d = model.affine
        aff = (a, bt, a * a - g, a * bt - d)
    tag = model.family_tag
    tag = tag[len("dual:"):] if tag.startswith("dual:") else "dual:" + tag
    return DualCoefficients(sigma=sig, sigma_prime=sp, drift=drift_hat,
                            drift_prime=drift_hat_prime, family_tag=tag,
                            params=dict(model.params), sigma_second=s2, affine=aff)


def derivative_mismatch(model: CoefficientModel, xs=None) -> float:
    """Worst relative gap between derivative fields and central differences."""
    if xs is None:
        xs = np.geomspace(1e-2, 1e2, 41)
    xs = np.asarray(xs, dtype=float)
    h = 1e-5 * xs
    worst = 0.0
    for f, fp in ((model.sigma, model.sigma_prime), (model.drift, model.drift_prime)):
        fd = (f(xs + h) - f(xs - h)) / (2 * h)
        an = fp(xs)
        scale = np.maximum(np.abs(an), np.abs(f(xs)) / xs)
        scale = np.maximum(scale, 1e-8)
        worst = max(worst, float(np.max(np.abs(fd - an) / scale)))
    return worst


# ---------------------------------------------------------------------------
# boundary integral


@dataclass(frozen=True)
class BoundaryIntegral:
    finite: bool
    value: float
    levels: int

    def __bool__(self):
        return self.finite


def feller_integral(model: CoefficientModel, which: str = "original", *,
                    max_levels: int = 200, blowup: float = 1e8,
                    growth_levels: int = 10) -> BoundaryIntegral:
    """Numerically test the boundary integral on ``(0, 1]``.

    ``which='dual'`` replaces the drift by ``sigma*sigma' - b``.  The integral
    is summed over dyadic shells ``[2^-(k+1), 2^-k]``.  It is declared
    divergent when the partial sum exceeds ``blowup`` or when the shell
    contributions stop decaying for ``growth_levels`` consecutive shells.
    This is a heuristic; no quadrature can certify divergence.
    """
    if which not in ("original", "dual"):
        raise ValueError("which must be 'original' or 'dual'")
    m = model if which == "original" else dual_transform(model)
    sig, b = m.sigma, m.drift

    probe = np.linspace(1e-6, 1.0, 2001)
    with np.errstate(all="ignore"):
        sv = np.asarray(sig(probe), dtype=float)
    if np.any(~(sv > 0)):
        raise ValueError("sigma vanishes or is undefined inside (0, 1]")

    def ratio(y):
        y = np.asarray(y, dtype=float)
        return 2.0 * b(y) / sig(y) ** 2

    def scalar(fn, y):
        return float(np.asarray(fn(np.array([y])))[0])

    def inner(x, right, b_right):
        # int_x^1 2b/sigma^2 given its value b_right at `right`
        val, _ = integrate.quad(lambda y: scalar(ratio, y), x, right, limit=100)
        return b_right + val

    def integrand(x, right, b_right):
        bx = inner(x, right, b_right)
        with np.errstate(over="ignore"):
            return np.exp(-bx) / scalar(sig, x) ** 2 + np.exp(bx)

    total = 0.0
    b_at = 0.0
    prev = None
    streak = 0
    for k in range(max_levels):
        hi, lo = 2.0 ** -k, 2.0 ** -(k + 1)
        with np.errstate(over="ignore"):
            c, _ = integrate.quad(integrand, lo, hi, args=(hi, b_at), limit=200)
        if not np.isfinite(c):
            return BoundaryIntegral(False, float("inf"), k + 1)
        total += c
        if total > blowup:
            return BoundaryIntegral(False, float("inf"), k + 1)
        if prev is not None and prev > 0 and c >= 0.999 * prev:
            streak += 1
            if streak >= growth_levels:
                return BoundaryIntegral(False, float("inf"), k + 1)
        else:
            streak = 0
        if prev is not None and c <= 1e-17 * total and k > growth_levels:
            return BoundaryIntegral(True, total, k + 1)
        prev = c
        b_at = inner(lo, hi, b_at)
    return BoundaryIntegral(True, total, max_levels)


# ---------------------------------------------------------------------------
# monotonicity of the Euler step


@dataclass(frozen=True)
class StepCondition:
    holds: bool
    witness: Optional[float] = None
    reason: str = ""

    def __bool__(self):
        return self.holds


def _family_condition(model: CoefficientModel, dt: float) -> Optional[StepCondition]:
    p = model.params
    tag = model.family_tag
    if tag in ("affine_affine", "constant") and model.affine is not None:
        a, bt, g, d = model.affine
        if a < 0 or bt < 0:
            return StepCondition(False, None, "needs alpha >= 0 and beta >= 0")
        det = a * d - bt * g
        if det * dt > bt + 1e-15:
            return StepCondition(False, None, f"det*dt = {det * dt:g} exceeds beta = {bt:g}")
        return StepCondition(True, None, "affine family: det*dt <= beta")
    if tag == "inverse_drift":
        if p["alpha"] < 0 or p["beta"] < 0:
            return StepCondition(False, None, "needs alpha >= 0 and beta >= 0")
        return StepCondition(True, None, "sigma affine with b = -1/x")
    if tag == "sqrt_diffusion":
        if p["d"] > 0:
            return StepCondition(False, None, "needs d <= 0")
        if max(0.0, -p["c"]) * dt > 1.0:
            return StepCondition(False, None, f"dt = {dt:g} too large for c = {p['c']:g}")
        return StepCondition(True, None, "sqrt diffusion with d <= 0 and small dt")
    if tag == "tanh_drift":
        if p["kappa"] * dt > 1.0:
            return StepCondition(False, None, "kappa*dt exceeds 1")
        return StepCondition(True, None, "constant sigma with -b'*dt <= 1")
    return None


def step_condition_lhs(model: CoefficientModel, x, dt):
    """``x*sigma'/sigma + (b*sigma'/sigma - b')*dt``.

    ``b*(log|b|)'`` is rewritten as ``b'`` so that zeros of ``b`` need no
    special case.
    """
    x = np.asarray(x, dtype=float)
    s = model.sigma(x)
    sp = model.sigma_prime(x)
    return x * sp / s + (model.drift(x) * sp / s - model.drift_prime(x)) * dt


def monotone_step_condition(model: CoefficientModel, dt: float,
                            x_range=(1e-4, 10.0), n_grid: int = 10_000) -> StepCondition:
    """Check the sufficient condition for the Euler step map to be nondecreasing.

    Requires ``sigma > 0``, ``sigma' >= 0`` and ``step_condition_lhs <= 1`` on
    a grid over ``x_range``.  Built-in families are additionally checked in
    closed form; the first failing grid point is returned as the witness.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    lo, hi = float(x_range[0]), float(x_range[1])
    if not 0 < lo < hi:
        raise ValueError("x_range must satisfy 0 < lo < hi")
    xs = np.union1d(np.linspace(lo, hi, n_grid), np.geomspace(lo, hi, n_grid))
    with np.errstate(all="ignore"):
        s = model.sigma(xs)
        sp = model.sigma_prime(xs)
        lhs = step_condition_lhs(model, xs, dt)
    bad = ~(s > 0) | (sp < -1e-14) | ~(lhs <= 1.0 + 1e-12)
    if np.any(bad):
        return StepCondition(False, float(xs[np.argmax(bad)]), "grid check failed")
    fam = _family_condition(model, dt)
    if fam is not None and not fam.holds:
        return fam
    return StepCondition(True, None, fam.reason if fam else "grid check")
