"""Euler-Maruyama absorbing flows, their duals, and the reflected scheme.

Sign convention.  A dual (reflected) motion driven forward by increments
``dw_hat_1, ..., dw_hat_n`` is the inverse of the absorbing flow on the
window ``[-n, 0]`` whose increments are ``dw_{-k} = -dw_hat_{k+1}``.
:func:`dualflow.noise.time_reverse` is the only place that conversion is made.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .coefficients import CoefficientModel, DualCoefficients
from .monotone_fn import MonotoneFn, right_inverse_fn
from .noise import NoisePath, TimeGrid, refine_noise

__all__ = [
    "MonotonicityError",
    "DiscreteFlow",
    "DualFlow",
    "ReflectedPath",
    "em_absorbing_step",
    "em_step_values",
    "absorbing_motion",
    "em_absorbing_flow",
    "snapshot_fn",
    "grid_eval",
    "grid_inverse",
    "dual_step",
    "dual_motion",
    "dual_flow",
    "em_reflected_path",
    "reflected_motion",
    "reference_flow",
    "default_initial_points",
    "step_map_violations",
    "implicit_relation_residuals",
    "max_dual_jump",
    "backward_values",
]

_MONO_TOL = 1e-12


class MonotonicityError(RuntimeError):
    """An Euler step map decreased somewhere; the dual construction is then invalid."""

    def __init__(self, step, pair, values=None):
        self.step = step
        self.pair = pair
        msg = f"Euler map is not nondecreasing at step {step} between grid points {pair}"
        if values is not None:
            msg += f" (values {values[0]:.17g} > {values[1]:.17g})"
        super().__init__(msg)


# ---------------------------------------------------------------------------
# one-step maps


def em_step_values(model: CoefficientModel, x, dw, dt):
    """``x + sigma(x) dw + b(x) dt`` evaluated where ``x > 0``; ``-inf`` elsewhere."""
    x = np.asarray(x, dtype=float)
    pos = x > 0
    safe = np.where(pos, x, 1.0)
    with np.errstate(all="ignore"):
        g = safe + model.sigma(safe) * dw + model.drift(safe) * dt
    return np.where(pos, g, -np.inf)


def em_absorbing_step(model: CoefficientModel, x, dw, dt):
    """One absorbing Euler step: 0 stays 0, otherwise ``max(0, x + sigma dw + b dt)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("state must be nonnegative")
    g = em_step_values(model, x, dw, dt)
    if np.any(np.isnan(g)):
        raise ValueError("coefficients could not be evaluated")
    out = np.maximum(g, 0.0)
    return out[()] if out.ndim == 0 else out


def absorbing_motion(model: CoefficientModel, y0, incs, dt, record=False):
    """Run absorbing Euler motions.

    ``incs`` has shape ``(S, n)``; ``y0`` broadcasts against ``(S, G)`` or ``(S,)``.
    Returns the final states, or all ``n+1`` states along a new axis 1 when
    ``record`` is true.
    """
    incs = np.asarray(incs, dtype=float)
    x = np.asarray(y0, dtype=float)
    if incs.ndim == 1:
        incs = incs[None, :]
    extra = x.ndim >= 2 or (x.ndim == 1 and x.shape[0] != incs.shape[0])
    if x.ndim == 1 and extra:
        x = np.broadcast_to(x, (incs.shape[0], x.shape[0]))
    else:
        x = np.broadcast_to(x, (incs.shape[0],) + x.shape[1:]) if x.ndim else \
            np.full(incs.shape[0], float(x))
    x = np.array(x, dtype=float)
    hist = [x.copy()] if record else None
    for k in range(incs.shape[1]):
        dw = incs[:, k][:, None] if x.ndim == 2 else incs[:, k]
        x = np.maximum(em_step_values(model, x, dw, dt), 0.0)
        if record:
            hist.append(x.copy())
    if record:
        return np.stack(hist, axis=1)
    return x


def dual_step(model: CoefficientModel, z, dw, dt, *, iters: int = 200):
    """Right-continuous inverse of one absorbing Euler step, evaluated at ``z >= 0``.

    Computes ``inf{y >= 0 : max(0, y + sigma(y) dw + b(y) dt) > z}`` with the
    value at 0 read as the limit from the right.  ``dw`` is the increment of
    the absorbing side.  Affine models are inverted in closed form; others by
    vectorised bisection, which is valid because the set ``{g > z}`` is an
    up-set whenever the step map is nondecreasing.
    """
    z = np.asarray(z, dtype=float)
    dw = np.asarray(dw, dtype=float)
    z, dw = np.broadcast_arrays(z, dw)
    if model.affine is not None:
        a, bt, g, d = model.affine
        A = 1.0 + a * dw + g * dt
        B = bt * dw + d * dt
        # A <= 0 is harmless only when the whole step map is clamped to 0
        bad = (A <= 0) & (B > 0)
        if np.any(bad):
            i = int(np.argmax(bad.ravel()))
            raise MonotonicityError(None, (i, i), (float(B.ravel()[i]), 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.maximum(0.0, (z - B) / A)
        return np.where(A > 0, out, np.inf)

    with np.errstate(all="ignore"):
        g0 = 0.0 + model.sigma(np.zeros_like(z)) * dw + model.drift(np.zeros_like(z)) * dt
    g0 = np.where(np.isnan(g0), -np.inf, g0)
    done = g0 > z
    lo = np.zeros_like(z)
    hi = np.maximum(1.0, 2.0 * z + 1.0)

    def g(y):
        with np.errstate(all="ignore"):
            return y + model.sigma(y) * dw + model.drift(y) * dt

    for _ in range(80):
        bad = ~(g(hi) > z) & ~done
        if not np.any(bad):
            break
        hi = np.where(bad, 2.0 * hi, hi)
    # a map that never exceeds z has an infinite inverse there
    lost = ~(g(hi) > z) & ~done
    done = done | lost
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        active = (mid > lo) & (mid < hi) & ~done
        if not np.any(active):
            break
        up = g(mid) > z
        hi = np.where(active & up, mid, hi)
        lo = np.where(active & ~up, mid, lo)
    return np.where(lost, np.inf, np.where(done, 0.0, hi))


def dual_motion(model: CoefficientModel, x0, hat_incs, dt, record=False):
    """Dual one-point motions ``X*_{0,l}(x0)`` driven by forward increments ``dw_hat``.

    Each step applies the inverse of the absorbing step whose increment is
    ``-dw_hat_l``; composing one-step inverses in this order equals inverting
    the composed absorbing map.
    """
    hat_incs = np.asarray(hat_incs, dtype=float)
    if hat_incs.ndim == 1:
        hat_incs = hat_incs[None, :]
    x = np.array(np.broadcast_to(np.asarray(x0, dtype=float),
                                 (hat_incs.shape[0],) + np.shape(x0)[1:]
                                 if np.ndim(x0) >= 1 and np.shape(x0)[0] == hat_incs.shape[0]
                                 else (hat_incs.shape[0],) + np.shape(x0)), dtype=float)
    hist = [x.copy()] if record else None
    for k in range(hat_incs.shape[1]):
        dw = -hat_incs[:, k]
        if x.ndim == 2:
            dw = dw[:, None]
        x = dual_step(model, x, dw, dt)
        if record:
            hist.append(x.copy())
    if record:
        return np.stack(hist, axis=1)
    return x


# ---------------------------------------------------------------------------
# grid snapshots


def snapshot_fn(points, values) -> MonotoneFn:
    """MonotoneFn through grid values of an absorbing flow map.

    Grid values are linearly interpolated, with the last segment's slope as the
    tail.  Below the first unabsorbed point ``p_j`` the first alive segment is
    continued down to its zero crossing, clamped at the last absorbed point (or
    at 0), and the map is 0 below that.
    """
    pts = np.asarray(points, dtype=float)
    vals = np.asarray(values, dtype=float)
    alive = np.nonzero(vals > 0)[0]
    if alive.size == 0:
        return MonotoneFn.constant(0.0)
    j = int(alive[0])
    xs, ys = pts[j:], vals[j:]
    slopes = np.diff(ys) / np.diff(xs) if xs.size > 1 else np.array([])
    tail = float(slopes[-1]) if slopes.size else 1.0
    slopes = np.maximum(slopes, 0.0)
    s = float(slopes[0]) if slopes.size else max(tail, 0.0)
    lo = float(pts[j - 1]) if j > 0 else 0.0
    a, va = _head(lo, float(xs[0]), float(ys[0]), s)
    if xs[0] <= 0:
        knots, vv, ss = xs, ys, slopes
    elif a > 0:
        knots = np.concatenate(([0.0, a], xs))
        vv = np.concatenate(([0.0, va], ys))
        ss = np.concatenate(([0.0, s], slopes))
    else:
        knots = np.concatenate(([0.0], xs))
        vv = np.concatenate(([va], ys))
        ss = np.concatenate(([s], slopes))
    return MonotoneFn(knots, vv, ss, max(tail, 0.0))


def _head(lo, p, v, s):
    """Start ``a`` of the head segment through ``(p, v)`` with slope ``s``, and its value."""
    a = max(lo, p - v / s) if s > 0 else lo
    return a, (v - s * (p - a) if s > 0 else v)


def _first_alive(V):
    alive = V > 0
    j = np.argmax(alive, axis=-1)
    none = ~alive.any(axis=-1)
    return j, none


def _grid_parts(pts, V):
    S, G = V.shape
    rows = np.arange(S)
    j, none = _first_alive(V)
    if G > 1:
        tail = (V[:, -1] - V[:, -2]) / (pts[-1] - pts[-2])
    else:
        tail = np.ones(S)
    jn = np.minimum(j + 1, G - 1)
    first = np.where(jn > j, (V[rows, jn] - V[rows, j])
                     / np.where(jn > j, pts[jn] - pts[j], 1.0), np.maximum(tail, 0.0))
    s = np.maximum(first, 0.0)
    lo = np.where(j > 0, pts[np.maximum(j - 1, 0)], 0.0)
    pj, vj = pts[j], V[rows, j]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(s > 0, np.maximum(lo, pj - vj / s), lo)
    va = np.where(s > 0, vj - s * (pj - a), vj)
    return rows, j, none, tail, s, a, va, pj, vj


def _rows_input(u, S):
    """Broadcast ``u`` to ``(S, M)``; returns it and whether the input had a column axis."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 2:
        return np.broadcast_to(u, (S, u.shape[1])), True
    return np.broadcast_to(u, (S,))[:, None], False


def grid_eval(points, V, x):
    """Evaluate :func:`snapshot_fn` interpolants row-wise; ``V`` is ``(S, G)``.

    ``x`` is a scalar, one point per row ``(S,)``, or a block ``(S, M)``.
    """
    pts = np.asarray(points, dtype=float)
    V = np.atleast_2d(np.asarray(V, dtype=float))
    S, G = V.shape
    x, block = _rows_input(x, S)
    rows, j, none, tail, s, a, va, pj, vj = (p[:, None] if np.ndim(p) else p
                                             for p in _grid_parts(pts, V))
    i = np.clip(np.searchsorted(pts, x, side="right") - 1, -1, G - 1)
    ic = np.maximum(i, 0)
    nxt = np.minimum(ic + 1, G - 1)
    step = np.where(nxt > ic, pts[nxt] - pts[ic], 1.0)
    seg = np.where(nxt > ic, (V[rows, nxt] - V[rows, ic]) / step, 0.0)
    slope = np.where(ic == G - 1, tail, seg)
    val = V[rows, ic] + np.maximum(slope, 0.0) * (x - pts[ic])
    head = np.where(x < a, 0.0, va + s * (x - a))
    out = np.where(x < pj, head, val)
    out = np.where(none | (x < 0), 0.0, out)
    return out if block else out[:, 0]


def grid_inverse(points, V, z):
    """Row-wise ``inf{y : F(y) > z}`` for the :func:`snapshot_fn` interpolants.

    ``z`` is a scalar, one level per row ``(S,)``, or a block ``(S, M)``.
    """
    pts = np.asarray(points, dtype=float)
    V = np.atleast_2d(np.asarray(V, dtype=float))
    S, G = V.shape
    z, block = _rows_input(z, S)
    rows, j, none, tail, s, a, va, pj, vj = (p[:, None] if np.ndim(p) else p
                                             for p in _grid_parts(pts, V))
    # rows of V are nondecreasing, so the count of values <= z is a sorted search
    i = np.stack([np.searchsorted(V[r], z[r], side="right") for r in range(S)])
    im1 = np.maximum(i - 1, 0)
    ic = np.minimum(i, G - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        interp = pts[im1] + (z - V[rows, im1]) / (V[rows, ic] - V[rows, im1]) * (pts[ic] - pts[im1])
        beyond = pts[-1] + (z - V[:, -1:]) / tail
        head = np.where(z < va, a, pj - (vj - z) / s)
    out = np.where(i >= G, np.where(tail > 0, beyond, np.inf), interp)
    out = np.where(z < vj, np.where(z < 0, 0.0, head), out)
    out = np.where(none, np.inf, out)
    return out if block else out[:, 0]


# ---------------------------------------------------------------------------
# flows


def default_initial_points(x_max=4.0, grid_points=1000, min_point=1e-3):
    """Uniform grid on ``[min_point, x_max]``; the smallest point stands in for 0+."""
    return np.linspace(min_point, x_max, grid_points)


@dataclass
class DiscreteFlow:
    """Grid values of the Euler absorbing flow ``X_{k_lo, l}`` for every step ``l``.

    ``values[l - k_lo, i]`` is the flow started at ``initial_points[i]`` at
    step ``k_lo`` and read at step ``l``.  ``stride > 1`` marks a reference flow
    whose fine noise is ``stride`` times finer than ``grid``.
    """

    model: CoefficientModel
    grid: TimeGrid
    initial_points: np.ndarray
    noise: NoisePath
    values: np.ndarray
    stride: int = 1
    _snapshots: Optional[List[MonotoneFn]] = field(default=None, repr=False)

    @property
    def k_lo(self) -> int:
        return self.noise.k_lo // self.stride

    @property
    def k_hi(self) -> int:
        return self.noise.k_hi // self.stride

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.k_lo, self.k_hi + 1)

    @property
    def times(self) -> np.ndarray:
        return self.steps * self.grid.h

    @property
    def absorbed_mask(self) -> np.ndarray:
        return self.values == 0.0

    @property
    def absorption_step(self) -> np.ndarray:
        """First step at which each point is absorbed; ``k_hi + 1`` if it never is."""
        mask = self.absorbed_mask
        first = np.argmax(mask, axis=0)
        return np.where(mask.any(axis=0), self.steps[first], self.k_hi + 1)

    def snapshot(self, l: int) -> MonotoneFn:
        return snapshot_fn(self.initial_points, self.values[l - self.k_lo])

    @property
    def snapshots(self) -> List[MonotoneFn]:
        if self._snapshots is None:
            self._snapshots = [self.snapshot(l) for l in self.steps]
        return self._snapshots


def _check_monotone(values, steps):
    d = np.diff(values, axis=-1)
    scale = np.maximum(1.0, np.abs(values[..., 1:]))
    bad = d < -_MONO_TOL * scale
    if np.any(bad):
        l, i = np.argwhere(bad)[0]
        raise MonotonicityError(int(steps[l]), (int(i), int(i) + 1),
                                (float(values[l, i]), float(values[l, i + 1])))


def em_absorbing_flow(model: CoefficientModel, grid: TimeGrid, initial_points,
                      noise: NoisePath, *, stride: int = 1) -> DiscreteFlow:
    """Absorbing Euler flow of all ``initial_points`` on one shared noise path.

    Raises :class:`MonotonicityError` if a step map fails to be nondecreasing on
    the grid, since the dual construction relies on it.
    """
    pts = np.asarray(initial_points, dtype=float)
    if pts.ndim != 1 or pts.size == 0 or np.any(pts <= 0) or np.any(np.diff(pts) <= 0):
        raise ValueError("initial_points must be positive and strictly increasing")
    dt = noise.h
    hist = absorbing_motion(model, pts[None, :], noise.increments[None, :], dt, record=True)[0]
    coarse = hist[::stride]
    steps = np.arange(noise.k_lo, noise.k_hi + 1)
    _check_monotone(hist, steps)
    return DiscreteFlow(model, grid, pts, noise, coarse, stride)


def reference_flow(model: CoefficientModel, grid: TimeGrid, initial_points,
                   noise: NoisePath, r: int = 6) -> DiscreteFlow:
    """Fine Euler flow on bridge-refined noise, read at the coarse nodes."""
    if r == 0:
        return em_absorbing_flow(model, grid, initial_points, noise)
    fine = refine_noise(noise, r)
    return em_absorbing_flow(model, grid, initial_points, fine, stride=2 ** r)


@dataclass
class DualFlow:
    """``snapshots[l]`` is ``X*_{0,l}``, the inverse of the absorbing map over the last ``l`` steps."""

    grid: TimeGrid
    initial_points: np.ndarray
    backward_values: np.ndarray
    snapshots: List[MonotoneFn]

    def __call__(self, l, x):
        return self.snapshots[l](x)


def backward_values(flow: DiscreteFlow) -> np.ndarray:
    """Grid values of ``X_{k_hi - l, k_hi}`` for ``l = 0..n`` (coarse ``l``)."""
    pts = flow.initial_points
    s = flow.stride
    incs = flow.noise.increments
    n_f = incs.size
    n = n_f // s
    state = np.tile(pts, (n + 1, 1))
    for kf in range(n_f):
        # fine step kf belongs to coarse step c; rows started at or before it are active
        c = kf // s
        first_row = n - c
        g = em_step_values(flow.model, state[first_row:], incs[kf], flow.noise.h)
        state[first_row:] = np.maximum(g, 0.0)
    # row l started at coarse step n - l, so it already holds X_{k_hi - l, k_hi}
    return state


def dual_flow(flow: DiscreteFlow) -> DualFlow:
    """Dual snapshots ``X*_{0,l} = (X_{k_hi-l, k_hi})^{-1}`` via exact inversion of the grid maps."""
    vals = backward_values(flow)
    snaps = []
    for l in range(vals.shape[0]):
        f = snapshot_fn(flow.initial_points, vals[l])
        snaps.append(right_inverse_fn(f))
    return DualFlow(flow.grid, flow.initial_points, vals, snaps)


# ---------------------------------------------------------------------------
# reflected scheme


@dataclass
class ReflectedPath:
    grid: TimeGrid
    values: np.ndarray
    local_time: np.ndarray


def reflected_motion(dual_model: CoefficientModel, x0, hat_incs, dt, record=False):
    """Projected Euler for the reflected equation; returns ``(X, dphi)`` arrays."""
    hat_incs = np.asarray(hat_incs, dtype=float)
    if hat_incs.ndim == 1:
        hat_incs = hat_incs[None, :]
    S = hat_incs.shape[0]
    x = np.array(np.broadcast_to(np.asarray(x0, dtype=float), (S,)), dtype=float)
    xs, phis = [x.copy()], [np.zeros(S)]
    for k in range(hat_incs.shape[1]):
        with np.errstate(all="ignore"):
            y = x + dual_model.sigma(x) * hat_incs[:, k] + dual_model.drift(x) * dt
        if np.any(np.isnan(y)):
            raise ValueError("coefficient evaluation failed in the reflected scheme")
        push = np.maximum(-y, 0.0)
        x = np.maximum(y, 0.0)
        if record:
            xs.append(x.copy())
            phis.append(push)
    if record:
        return np.stack(xs, axis=1), np.stack(phis, axis=1)
    return x, None


def em_reflected_path(dual_model: DualCoefficients, grid: TimeGrid, x0: float,
                      noise: NoisePath) -> ReflectedPath:
    """Reflected (projected) Euler path driven by the forward noise ``noise``."""
    if not noise.h > 0:
        raise ValueError("dt must be positive")
    if x0 < 0:
        raise ValueError("x0 must be nonnegative")
    xs, phi = reflected_motion(dual_model, x0, noise.increments[None, :], noise.h, record=True)
    return ReflectedPath(grid, xs[0], phi[0])


# ---------------------------------------------------------------------------
# diagnostics


def step_map_violations(model: CoefficientModel, points, dws, dt) -> list:
    """``(increment index, grid pair)`` for every decrease of an Euler step map on ``points``.

    Each row of the result of one step from all grid points must be
    nondecreasing; an empty list means the runtime check passes.
    """
    pts = np.asarray(points, dtype=float)
    dws = np.atleast_1d(np.asarray(dws, dtype=float))
    vals = np.maximum(em_step_values(model, pts[None, :], dws[:, None], dt), 0.0)
    d = np.diff(vals, axis=1)
    bad = d < -_MONO_TOL * np.maximum(1.0, np.abs(vals[:, 1:]))
    return [(int(k), (int(i), int(i) + 1)) for k, i in np.argwhere(bad)]


def implicit_relation_residuals(model: CoefficientModel, points, hat_dw, dt):
    """Residuals of the implicit dual-step equation on a grid, for one step.

    The dual value at ``x`` is the grid inverse of the absorbing step with
    increment ``-hat_dw``; wherever it is positive, ``x`` should be recovered
    as ``max(0, X - sigma(X) hat_dw + b(X) dt)``.  Returns the dual values and
    residuals (NaN where the dual value is 0).
    """
    pts = np.asarray(points, dtype=float)
    vals = np.maximum(em_step_values(model, pts, -hat_dw, dt), 0.0)
    xh = grid_inverse(pts, vals[None, :], pts[None, :])[0]
    with np.errstate(all="ignore"):
        back = np.maximum(0.0, xh + model.sigma(xh) * (-hat_dw) + model.drift(xh) * dt)
    res = np.where(xh > 0, np.abs(back - pts), np.nan)
    return xh, res


def max_dual_jump(dual: DualFlow, x) -> float:
    """Largest one-step change of the dual one-point motion from ``x`` (diagnostic only)."""
    path = np.array([float(s(x)) for s in dual.snapshots])
    return float(np.max(np.abs(np.diff(path)))) if path.size > 1 else 0.0
