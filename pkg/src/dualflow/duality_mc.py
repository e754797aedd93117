"""Monte Carlo estimators and verification harnesses for dual flows.

Every estimator draws its noise from counter-based streams named by a tag, so
estimates are bit-reproducible and do not depend on how samples are spread
over worker processes.  Samples are cut into fixed blocks; workers only
decide who computes a block, and the per-sample values are reassembled in
block order before any reduction.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .coefficients import FAMILIES, CoefficientModel, dual_transform, from_family
from .flow import absorbing_motion, dual_motion, reflected_motion, snapshot_fn
from .monotone_fn import MonotoneFn, max_slope, right_inverse_at, right_inverse_fn, sup_metric
from .noise import TimeGrid, refine_increments, sample_increments, stable_hash

__all__ = [
    "MCEstimate",
    "TestFunction",
    "bm_absorbed_tail",
    "reflected_bm_expectation",
    "estimate_tail_prob",
    "estimate_tail_probs",
    "estimate_dual_expectation",
    "estimate_reflected_expectation",
    "SiegmundResult",
    "siegmund_check",
    "seesaw_mismatches",
    "inverse_expectation_identity",
    "WeakIdentityReport",
    "weak_error_identity_check",
    "RateFit",
    "fit_rate",
    "weak_rate_fit",
    "StrongBoundReport",
    "strong_error_bound_check",
    "gronwall_bound_check",
    "zero_occupation_check",
    "Z_THRESHOLD",
]

Z_THRESHOLD = 4.0
BLOCK = 2000


# ---------------------------------------------------------------------------
# estimates


@dataclass(frozen=True)
class MCEstimate:
    """Sample mean with standard error ``std / sqrt(n)``."""

    mean: float
    std_err: float
    n_samples: int

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if self.std_err < 0:
            raise ValueError("std_err must be nonnegative")

    @classmethod
    def from_samples(cls, values) -> "MCEstimate":
        v = np.asarray(values, dtype=float).ravel()
        n = v.size
        if n == 0:
            raise ValueError("no samples")
        mean = float(np.mean(v))
        se = float(np.std(v, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(mean, se, n)

    def merge(self, other: "MCEstimate") -> "MCEstimate":
        """Combine two estimates of the same quantity (Chan et al. pooled variance)."""
        n1, n2 = self.n_samples, other.n_samples
        n = n1 + n2
        d = other.mean - self.mean
        mean = self.mean + d * n2 / n
        m2 = sum(e.std_err ** 2 * e.n_samples * (e.n_samples - 1) for e in (self, other))
        m2 += d * d * n1 * n2 / n
        return MCEstimate(mean, math.sqrt(m2 / (n - 1) / n), n)

    def z_against(self, other) -> float:
        """z-score of ``self - other``; ``other`` may be an estimate or an exact number."""
        if isinstance(other, MCEstimate):
            diff, se = self.mean - other.mean, math.hypot(self.std_err, other.std_err)
        else:
            diff, se = self.mean - float(other), self.std_err
        if se == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / se


@dataclass(frozen=True)
class TestFunction:
    """Bump ``scale * c * u^2 (R-u)^2`` on ``[0, R]`` and 0 beyond, with ``max = scale``."""

    __test__ = False  # not a pytest class

    R: float = 2.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("support edge R must be positive")

    @property
    def c(self) -> float:
        return self.scale * 16.0 / self.R ** 4

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        inside = (u >= 0) & (u <= self.R)
        return np.where(inside, self.c * u * u * (self.R - u) ** 2, 0.0)

    def prime(self, u):
        u = np.asarray(u, dtype=float)
        inside = (u >= 0) & (u <= self.R)
        return np.where(inside, 2.0 * self.c * u * (self.R - u) * (self.R - 2.0 * u), 0.0)


# ---------------------------------------------------------------------------
# Brownian oracles


def bm_absorbed_tail(x, y, T):
    """P(Brownian motion from ``x`` killed at 0 is above ``y`` at time ``T``)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = math.sqrt(T)
    out = ndtr((x - y) / s) - ndtr((-x - y) / s)
    return out[()] if out.ndim == 0 else out


def reflected_bm_expectation(f: Callable, x: float, T: float) -> float:
    """``E f(|x + W_T|)`` by quadrature against the reflected Gaussian density."""
    s = math.sqrt(T)

    def dens(u):
        return (np.exp(-0.5 * ((u - x) / s) ** 2) + np.exp(-0.5 * ((u + x) / s) ** 2)) / (
            s * math.sqrt(2 * math.pi))

    upper = getattr(f, "R", x + 12 * s)
    val, _ = integrate.quad(lambda u: float(f(u)) * dens(u), 0.0, upper, limit=200,
                            epsabs=1e-13, epsrel=1e-12)
    return val


# ---------------------------------------------------------------------------
# block execution


def _model_key(model: CoefficientModel):
    tag = model.family_tag
    base = tag[len("dual:"):] if tag.startswith("dual:") else tag
    if base not in FAMILIES:
        return None
    return (tag, tuple(sorted(model.params.items())))


def _rebuild(key):
    tag, params = key
    if tag.startswith("dual:"):
        return dual_transform(from_family(tag[len("dual:"):], **dict(params)))
    return from_family(tag, **dict(params))


def _call_block(kernel, key, kwargs, start, size):
    return kernel(model=_rebuild(key), start=start, size=size, **kwargs)


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit value, else ``DUALFLOW_WORKERS``, else 1."""
    if workers is None:
        env = os.environ.get("DUALFLOW_WORKERS")
        workers = int(env) if env else 1
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return workers


def run_blocks(kernel, model, n_samples: int, workers: Optional[int] = None,
               block: int = BLOCK, **kwargs) -> np.ndarray:
    """Evaluate ``kernel(model=, start=, size=, **kwargs)`` over fixed sample blocks.

    Results are concatenated in block order, so the output does not depend on
    ``workers``.  Custom (unpicklable) models always run in-process.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    starts = list(range(0, n_samples, block))
    sizes = [min(block, n_samples - s) for s in starts]
    workers = resolve_workers(workers)
    key = _model_key(model)
    if workers == 1 or len(starts) == 1 or key is None:
        parts = [kernel(model=model, start=s, size=z, **kwargs) for s, z in zip(starts, sizes)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(partial(_call_block, kernel, key, kwargs), starts, sizes))
    return np.concatenate(parts, axis=0)


def _streams(tag: str, start: int, size: int) -> np.ndarray:
    base = np.uint64(stable_hash(tag))
    with np.errstate(over="ignore"):
        return base + np.arange(start, start + size, dtype=np.uint64)


def _noise(seed, streams, n, h, r, k_lo=0):
    """Coarse increments and their ``2**r`` bridge refinement on ``(k_lo, k_lo+n]``."""
    coarse = sample_increments(seed, streams, k_lo, k_lo + n, h)
    fine = refine_increments(coarse, seed, streams, k_lo, h, r) if r > 0 else coarse
    return coarse, fine


def _scheme_r(scheme: str, r: int) -> int:
    if scheme == "coarse":
        return 0
    if scheme == "reference":
        if r < 0:
            raise ValueError("r must be >= 0")
        return r
    raise ValueError("scheme must be 'coarse' or 'reference'")


def _check_samples(n_samples):
    if int(n_samples) != n_samples or n_samples < 2:
        raise ValueError("n_samples must be an integer >= 2")


# ---------------------------------------------------------------------------
# kernels (module level so they can be shipped to worker processes)


def _k_tail(model, start, size, *, seed, tag, starts, levels, n, h, r):
    _, fine = _noise(seed, _streams(tag, start, size), n, h, r)
    y0 = np.broadcast_to(np.asarray(starts, dtype=float), (size, len(starts)))
    xs = absorbing_motion(model, y0, fine, h / 2 ** r)
    return (xs > np.asarray(levels, dtype=float)).astype(float)


def _k_dual(model, start, size, *, seed, tag, starts, n, h, r):
    _, fine = _noise(seed, _streams(tag, start, size), n, h, r)
    y0 = np.broadcast_to(np.asarray(starts, dtype=float), (size, len(starts)))
    return dual_motion(model, y0, fine, h / 2 ** r)


def _k_reflected(model, start, size, *, seed, tag, x0, n, h):
    incs = sample_increments(seed, _streams(tag, start, size), 0, n, h)
    xs, _ = reflected_motion(model, x0, incs, h)
    return xs


# ---------------------------------------------------------------------------
# estimators


def estimate_tail_prob(model: CoefficientModel, x: float, y: float, grid: TimeGrid,
                       scheme: str = "coarse", n_samples: int = 10_000, seed: int = 0,
                       *, r: int = 6, tag: str = "tail", workers=None) -> MCEstimate:
    """Frequency of ``{absorbing motion from y is above x at the horizon}``."""
    _check_samples(n_samples)
    rr = _scheme_r(scheme, r)
    if y <= 0:
        return MCEstimate(0.0, 0.0, n_samples)
    ind = run_blocks(_k_tail, model, n_samples, workers, seed=seed, tag=tag, starts=[y],
                     levels=[x], n=grid.n, h=grid.h, r=rr)
    return MCEstimate.from_samples(ind[:, 0])


def estimate_tail_probs(model: CoefficientModel, pairs, grid: TimeGrid, scheme: str = "coarse",
                        n_samples: int = 10_000, seed: int = 0, *, r: int = 6,
                        tag: str = "tail", workers=None) -> List[MCEstimate]:
    """:func:`estimate_tail_prob` for several ``(x, y)`` pairs on shared noise paths.

    Each estimate is marginally the same as a separate run; estimates for
    different pairs are correlated.
    """
    _check_samples(n_samples)
    rr = _scheme_r(scheme, r)
    pairs = [(float(a), float(b)) for a, b in pairs]
    if not pairs or any(b <= 0 for _, b in pairs):
        raise ValueError("pairs must be nonempty with y > 0")
    ind = run_blocks(_k_tail, model, n_samples, workers, seed=seed, tag=tag,
                     starts=[b for _, b in pairs], levels=[a for a, _ in pairs],
                     n=grid.n, h=grid.h, r=rr)
    return [MCEstimate.from_samples(ind[:, i]) for i in range(len(pairs))]


def estimate_dual_expectation(model: CoefficientModel, f: Callable, x: float, grid: TimeGrid,
                              n_samples: int = 10_000, seed: int = 0, *,
                              scheme: str = "coarse", r: int = 6, tag: str = "dual",
                              workers=None) -> MCEstimate:
    """Mean of ``f`` at the dual one-point motion ``X*_{0,n}(x)``.

    The dual motion is evaluated pointwise by composing exact inverses of the
    Euler step maps, which equals the inverse of the composed flow map.
    """
    _check_samples(n_samples)
    rr = _scheme_r(scheme, r)
    vals = run_blocks(_k_dual, model, n_samples, workers, seed=seed, tag=tag, starts=[x],
                      n=grid.n, h=grid.h, r=rr)[:, 0]
    return MCEstimate.from_samples(f(vals))


def estimate_reflected_expectation(dual_model: CoefficientModel, f: Callable, x: float,
                                   grid: TimeGrid, n_samples: int = 10_000, seed: int = 0,
                                   *, tag: str = "dual", workers=None) -> MCEstimate:
    """Mean of ``f`` along projected Euler for the reflected equation (same streams as the dual)."""
    _check_samples(n_samples)
    vals = run_blocks(_k_reflected, dual_model, n_samples, workers, seed=seed, tag=tag,
                      x0=x, n=grid.n, h=grid.h)
    return MCEstimate.from_samples(f(vals))


# ---------------------------------------------------------------------------
# Siegmund duality


@dataclass
class SiegmundResult:
    pairs: list
    lhs: MCEstimate
    rhs: MCEstimate

    @property
    def z(self) -> float:
        return self.lhs.z_against(self.rhs)

    @property
    def passed(self) -> bool:
        return abs(self.z) <= Z_THRESHOLD


def siegmund_check(model: CoefficientModel, pairs, grid: TimeGrid, n_samples: int = 10_000,
                   seed: int = 0, *, scheme: str = "coarse", r: int = 6, joint: bool = False,
                   workers=None) -> List[SiegmundResult]:
    """Compare ``P(X*(y) <= x)`` with ``P(X(x) > y)`` on independent sample sets.

    The dual side runs dual one-point motions from every ``y`` on one set of
    streams; the absorbing side runs one-point motions from every ``x`` on
    another.  With ``joint=True`` all pairs form one joint event.
    """
    pairs = [(float(a), float(b)) for a, b in pairs]
    if not pairs:
        raise ValueError("pairs must be nonempty")
    _check_samples(n_samples)
    rr = _scheme_r(scheme, r)
    xs = sorted({p[0] for p in pairs})
    ys = sorted({p[1] for p in pairs})
    dual = run_blocks(_k_dual, model, n_samples, workers, seed=seed, tag="siegmund:dual",
                      starts=ys, n=grid.n, h=grid.h, r=rr)
    prim_vals = run_blocks(_k_motion, model, n_samples, workers, seed=seed,
                           tag="siegmund:primal", starts=xs, n=grid.n, h=grid.h, r=rr)
    lhs_ind = np.stack([dual[:, ys.index(y)] <= x for x, y in pairs], axis=1)
    rhs_ind = np.stack([prim_vals[:, xs.index(x)] > y for x, y in pairs], axis=1)
    if joint:
        return [SiegmundResult(pairs, MCEstimate.from_samples(lhs_ind.all(axis=1)),
                               MCEstimate.from_samples(rhs_ind.all(axis=1)))]
    return [SiegmundResult([p], MCEstimate.from_samples(lhs_ind[:, i]),
                           MCEstimate.from_samples(rhs_ind[:, i]))
            for i, p in enumerate(pairs)]


def _k_motion(model, start, size, *, seed, tag, starts, n, h, r):
    _, fine = _noise(seed, _streams(tag, start, size), n, h, r)
    y0 = np.broadcast_to(np.asarray(starts, dtype=float), (size, len(starts)))
    return absorbing_motion(model, y0, fine, h / 2 ** r)


def seesaw_mismatches(f: MonotoneFn, xs, ys) -> int:
    """Count pairs where ``{f^{-1}(y) <= x}`` and ``{f(x) > y}`` disagree."""
    bad = 0
    for x in np.atleast_1d(xs):
        fx = f(x)
        for y in np.atleast_1d(ys):
            bad += (right_inverse_at(f, y) <= x) != (fx > y)
    return int(bad)


# ---------------------------------------------------------------------------
# integration by parts and the weak-error identity


def _trapezoid_weights(nodes):
    w = np.zeros_like(nodes)
    d = np.diff(nodes)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def inverse_expectation_identity(ensemble: Sequence[MonotoneFn], f: TestFunction, x: float,
                                 n_nodes: int = 1000):
    """Both sides of ``E f(X^{-1}(x)) = -int f'(y) P(X(y) > x) dy`` over an ensemble.

    The right side uses the trapezoid rule on ``[0, R]``; each member contributes
    one sample to each side.
    """
    ens = list(ensemble)
    if not ens:
        raise ValueError("empty ensemble")
    nodes = np.linspace(0.0, f.R, n_nodes)
    w = _trapezoid_weights(nodes) * f.prime(nodes)
    lhs, rhs = [], []
    for phi in ens:
        if not phi.tail > 0:
            raise ValueError("ensemble members need a positive tail slope")
        lhs.append(float(f(float(right_inverse_at(phi, x)))))
        ind = np.asarray(phi(nodes), dtype=float) > x
        rhs.append(-float(np.sum(w * ind)))
    if len(ens) == 1:
        return MCEstimate(lhs[0], 0.0, 1), MCEstimate(rhs[0], 0.0, 1)
    return MCEstimate.from_samples(lhs), MCEstimate.from_samples(rhs)


def _k_weak_lhs(model, start, size, *, seed, tag, x, n, h, r, f):
    coarse, fine = _noise(seed, _streams(tag, start, size), n, h, r)
    xc = dual_motion(model, x, coarse, h)
    xr = dual_motion(model, x, fine, h / 2 ** r)
    return f(xr) - f(xc)


def _threshold_index(model, nodes, level, incs, dt):
    """Per row, the first node index whose absorbing motion ends above ``level``.

    The flow is monotone in the starting point, so the indicator is a step in
    the node index and bisection needs only ``log2(len(nodes))`` motions.
    """
    S = incs.shape[0]
    N = nodes.size
    lo = np.full(S, -1)  # indicator false at lo (virtual -1)
    hi = np.full(S, N)  # indicator true at hi (virtual N)
    while True:
        active = hi - lo > 1
        if not np.any(active):
            return hi
        mid = (lo + hi) // 2
        y0 = np.where(active, nodes[np.clip(mid, 0, N - 1)], 0.0)
        up = absorbing_motion(model, y0, incs, dt) > level
        hi = np.where(active & up, mid, hi)
        lo = np.where(active & ~up, mid, lo)


def _k_weak_rhs(model, start, size, *, seed, tag, x, n, h, r, nodes, wf):
    coarse, fine = _noise(seed, _streams(tag, start, size), n, h, r)
    ic = _threshold_index(model, nodes, x, coarse, h)
    ir = _threshold_index(model, nodes, x, fine, h / 2 ** r)
    suffix = np.concatenate((np.cumsum(wf[::-1])[::-1], [0.0]))
    # int f'(y) (1{Y_n(y) > x} - 1{X(y) > x}) dy
    return suffix[ic] - suffix[ir]


@dataclass
class WeakIdentityReport:
    lhs: MCEstimate
    rhs: MCEstimate
    allowance: float = 1e-3
    conditional: bool = False

    @property
    def std_err(self) -> float:
        return math.hypot(self.lhs.std_err, self.rhs.std_err)

    @property
    def z(self) -> float:
        return self.lhs.z_against(self.rhs)

    @property
    def passed(self) -> bool:
        gap = abs(self.lhs.mean - self.rhs.mean)
        return gap <= Z_THRESHOLD * self.std_err + self.allowance


def weak_error_identity_check(model: CoefficientModel, f: TestFunction, x: float, T: float,
                              n: int, n_samples: int = 10_000, seed: int = 0, *, r: int = 6,
                              n_nodes: int = 1000, allowance: float = 1e-3,
                              workers=None) -> WeakIdentityReport:
    """Both sides of the weak-error identity between the reference and coarse flows.

    LHS: ``E f(X*_ref(x)) - E f(X^{n*}(x))`` from coupled dual motions.
    RHS: ``int_0^R f'(y) (P(Y_n(y) > x) - P(X_ref(y) > x)) dy`` from coupled
    absorbing motions on an independent stream set, trapezoid rule in ``y``.
    """
    _check_samples(n_samples)
    grid = TimeGrid(T, n)
    lhs = run_blocks(_k_weak_lhs, model, n_samples, workers, seed=seed, tag="weak:dual",
                     x=x, n=n, h=grid.h, r=r, f=f)
    nodes = np.linspace(0.0, f.R, n_nodes)
    wf = _trapezoid_weights(nodes) * f.prime(nodes)
    rhs = run_blocks(_k_weak_rhs, model, n_samples, workers, seed=seed, tag="weak:primal",
                     x=x, n=n, h=grid.h, r=r, nodes=nodes, wf=wf)
    return WeakIdentityReport(MCEstimate.from_samples(lhs), MCEstimate.from_samples(rhs),
                              allowance, conditional=model.family_tag == "custom")


# ---------------------------------------------------------------------------
# weak rate


@dataclass
class RateFit:
    slope: Optional[float]
    ci: Optional[tuple]
    errors: List[MCEstimate]
    n_list: List[int]
    verdict: str

    @property
    def passed(self) -> bool:
        if self.verdict == "resolution insufficient":
            return True
        return -0.75 <= self.slope <= -0.25


def fit_rate(n_list, errors) -> float:
    """Least-squares slope of ``log|err|`` against ``log n``."""
    ln = np.log(np.asarray(n_list, dtype=float))
    le = np.log(np.abs(np.asarray(errors, dtype=float)))
    return float(np.polyfit(ln, le, 1)[0])


def _k_rate(model, start, size, *, seed, tag, x, n0, levels, r, h0, f, exact):
    streams = _streams(tag, start, size)
    base = sample_increments(seed, streams, 0, n0, h0)
    cols = []
    for j in levels:
        incs = refine_increments(base, seed, streams, 0, h0, j) if j else base
        cols.append(f(dual_motion(model, x, incs, h0 / 2 ** j)))
    if exact is None:
        fine = refine_increments(base, seed, streams, 0, h0, max(levels) + r)
        ref = f(dual_motion(model, x, fine, h0 / 2 ** (max(levels) + r)))
    else:
        ref = np.full(size, exact)
    return np.stack([ref - c for c in cols], axis=1)


def weak_rate_fit(model: CoefficientModel, f: TestFunction, x: float, T: float, n_list,
                  n_samples: int = 10_000, seed: int = 0, *, r: int = 6,
                  exact: Optional[float] = None, n_boot: int = 400,
                  workers=None) -> RateFit:
    """Empirical order of the weak error of the dual scheme.

    All resolutions share one Brownian path per sample (bridge refinement of
    the coarsest grid).  The target is ``exact`` when given, otherwise a
    reference ``2**r`` times finer than the finest ``n``.  The confidence
    interval is a 95% percentile bootstrap over samples.
    """
    n_list = sorted(int(v) for v in n_list)
    if len(n_list) < 4:
        raise ValueError("n_list needs at least 4 entries")
    n0 = n_list[0]
    levels = []
    for v in n_list:
        j = int(round(math.log2(v / n0)))
        if n0 * 2 ** j != v:
            raise ValueError("n_list must be dyadic multiples of its smallest entry")
        levels.append(j)
    _check_samples(n_samples)
    d = run_blocks(_k_rate, model, n_samples, workers, seed=seed, tag="weak_rate", x=x,
                   n0=n0, levels=levels, r=r, h0=T / n0, f=f, exact=exact)
    errs = [MCEstimate.from_samples(d[:, i]) for i in range(d.shape[1])]
    if any(abs(e.mean) <= Z_THRESHOLD * e.std_err for e in errs):
        return RateFit(None, None, errs, n_list, "resolution insufficient")
    slope = fit_rate(n_list, [e.mean for e in errs])
    rng = np.random.default_rng(stable_hash("weak_rate:bootstrap", seed))
    boots = []
    for _ in range(n_boot):
        idx = rng.integers(0, d.shape[0], d.shape[0])
        m = d[idx].mean(axis=0)
        if np.all(m != 0):
            boots.append(fit_rate(n_list, m))
    ci = (float(np.percentile(boots, 2.5)), float(np.percentile(boots, 97.5)))
    return RateFit(slope, ci, errs, n_list, "fitted")


# ---------------------------------------------------------------------------
# strong error


def _k_strong_maps(model, start, size, *, seed, tag, n, h, r, pts):
    coarse, fine = _noise(seed, _streams(tag, start, size), n, h, r, k_lo=-n)
    y0 = np.broadcast_to(pts, (size, pts.size))
    vc = absorbing_motion(model, y0, coarse, h)
    vr = absorbing_motion(model, y0, fine, h / 2 ** r) if r else vc
    return np.stack([vr, vc], axis=1)


@dataclass
class StrongBoundReport:
    lhs: np.ndarray
    rhs: np.ndarray
    factor: np.ndarray
    tol: float = 1e-6

    @property
    def violations(self) -> np.ndarray:
        return self.lhs > self.rhs + self.tol

    @property
    def violation_fraction(self) -> float:
        return float(np.mean(self.violations))

    @property
    def expectation_holds(self) -> bool:
        return float(np.mean(self.lhs)) <= float(np.mean(self.rhs)) + self.tol

    @property
    def passed(self) -> bool:
        return self.violation_fraction <= 0.01


def _strong_sides(vr, vc, pts, K, factor):
    A = snapshot_fn(pts, vr)
    B = snapshot_fn(pts, vc)
    Ai, Bi = right_inverse_fn(A), right_inverse_fn(B)
    lhs = float(sup_metric(Ai, Bi, K))
    m = min(float(Ai(K)), float(Bi(K)))
    gap = float(sup_metric(A, B, m)) if m > 0 else abs(float(A(0.0)) - float(B(0.0)))
    if factor is None:
        fac = 1.0 + float(max_slope(Ai, 0.0, K))
    else:
        fac = factor
    return lhs, fac * gap, fac


def _strong_report(model, K, T, n, n_samples, seed, r, pts, tol, factor, tag, workers):
    _check_samples(n_samples)
    if not K > 0:
        raise ValueError("K must be positive")
    h = T / n
    maps = run_blocks(_k_strong_maps, model, n_samples, workers, block=50, seed=seed, tag=tag,
                      n=n, h=h, r=r, pts=np.asarray(pts, dtype=float))
    out = np.array([_strong_sides(m[0], m[1], pts, K, factor) for m in maps])
    return StrongBoundReport(out[:, 0], out[:, 1], out[:, 2], tol)


def strong_error_bound_check(model: CoefficientModel, K: float, T: float, n: int,
                             n_samples: int = 1000, seed: int = 0, *, r: int = 6,
                             points=None, tol: float = 1e-6, workers=None) -> StrongBoundReport:
    """Per-sample inverse-regularity bound between reference and coarse duals.

    Both duals are inverses of absorbing flow maps on the window ``[-n, 0]``
    driven by the same (bridge-refined) noise.  LHS is the sup distance of the
    inverses on ``[0, K]``; RHS is ``(1 + sup slope of the reference inverse)``
    times the sup distance of the forward maps on ``[0, m]``.
    """
    pts = np.linspace(1e-3, 10.0, 2000) if points is None else np.asarray(points, dtype=float)
    return _strong_report(model, K, T, n, n_samples, seed, r, pts, tol, None, "strong", workers)


def gronwall_bound_check(model: CoefficientModel, K: float, T: float, n: int,
                         b_prime_sup: float, n_samples: int = 1000, seed: int = 0, *,
                         r: int = 6, points=None, tol: float = 1e-6,
                         workers=None) -> StrongBoundReport:
    """As :func:`strong_error_bound_check` with the slope replaced by ``exp(|b'| T)``."""
    if model.constant_sigma is None and not _is_constant_sigma(model):
        raise ValueError("the Gronwall variant needs a constant diffusion coefficient")
    if not (b_prime_sup >= 0 and math.isfinite(b_prime_sup)):
        raise ValueError("b_prime_sup must be finite and nonnegative")
    pts = np.linspace(1e-3, 10.0, 2000) if points is None else np.asarray(points, dtype=float)
    return _strong_report(model, K, T, n, n_samples, seed, r, pts, tol,
                          1.0 + math.exp(b_prime_sup * T), "gronwall", workers)


def _is_constant_sigma(model) -> bool:
    xs = np.geomspace(1e-4, 1e3, 200)
    s = np.asarray(model.sigma(xs), dtype=float)
    sp = np.asarray(model.sigma_prime(xs), dtype=float)
    return bool(np.all(sp == 0) and np.ptp(s) == 0)


# ---------------------------------------------------------------------------
# zero occupation


def zero_occupation_check(model: CoefficientModel, t: float, grid: TimeGrid,
                          n_samples: int = 10_000, seed: int = 0, *, x0: float = 0.1,
                          workers=None) -> MCEstimate:
    """Frequency with which the dual one-point motion sits exactly at 0 at time ``t``."""
    _check_samples(n_samples)
    k = int(round(t / grid.h))
    if not 0 <= k <= grid.n:
        raise ValueError("t outside the grid")
    if k == 0:
        return MCEstimate(float(x0 == 0), 0.0, n_samples)
    vals = run_blocks(_k_dual, model, n_samples, workers, seed=seed, tag="zero_occupation",
                      starts=[x0], n=k, h=grid.h, r=0)[:, 0]
    return MCEstimate.from_samples(vals == 0.0)
