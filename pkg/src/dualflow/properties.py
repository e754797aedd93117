"""Random monotone fixtures and the inequality checks of the function algebra.

Each ``check_*`` returns a list of human-readable violations (empty when the
property holds), so the same code drives unit tests, the acceptance suite
and ``dualflow verify``.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .monotone_fn import (
    MonotoneFn,
    compose,
    eval_fn,
    left_limit,
    levy_metric,
    max_slope,
    right_inverse_at,
    right_inverse_fn,
    sup_metric,
    truncate_min,
)

__all__ = [
    "random_monotone",
    "random_pair",
    "probe_levels",
    "check_inverse_properties",
    "check_seesaw",
    "check_levy_le_sup",
    "check_sup_le_levy",
    "check_sup_le_levy_interior",
    "check_inverse_levy",
    "check_inverse_regularity",
    "brute_force_levy",
    "property_suite",
]


def random_monotone(rng: np.random.Generator, *, exact: bool = False, max_knots: int = 6,
                    continuous: bool = False, start_zero: bool = False,
                    strict: bool = False, scale: float = 1.0) -> MonotoneFn:
    """Random step / piecewise-linear element with a positive tail slope.

    Exact fixtures live on a quarter-integer lattice so that flat values,
    jump locations and knot values collide often.
    """
    m = int(rng.integers(1, max_knots + 1))
    if exact:
        q = Fraction(1, 4)
        cuts = np.sort(rng.choice(np.arange(1, 8 * m + 1), size=m, replace=False))
        knots = [Fraction(0)] + [int(c) * q for c in cuts]

        def level():
            return int(rng.integers(1, 9)) * q

        zero = Fraction(0)
    else:
        knots = [0.0] + list(np.sort(rng.uniform(0.0, 2.0 * m, m)) * scale / 2)

        def level():
            return float(rng.uniform(0.05, 1.5)) * scale

        zero = 0.0
    vals, slopes = [], []
    v = zero if (start_zero or rng.random() < 0.3) else level() * (0 if continuous else 1)
    for i in range(m + 1):
        vals.append(v)
        s = level() if (strict or rng.random() < 0.6) else zero
        slopes.append(s)
        if i < m:
            v = v + s * (knots[i + 1] - knots[i])
            if not continuous and rng.random() < 0.5:
                v = v + level()
    tail = slopes.pop()
    if not tail > 0:
        tail = level()
    return MonotoneFn(knots, vals, slopes, tail)


def random_pair(rng, **kw):
    return random_monotone(rng, **kw), random_monotone(rng, **kw)


def probe_levels(*fns, rng=None, n_random: int = 4):
    """Values worth probing: knots, values and left limits of every function, plus randoms."""
    exact = all(f.exact for f in fns)
    pts = {0 if exact else 0.0}
    for f in fns:
        for k in f.knots:
            pts.add(k)
            pts.add(eval_fn(f, k))
            if k > 0:
                pts.add(left_limit(f, k))
    out = sorted(p for p in pts if p >= 0)
    if rng is not None:
        hi = float(max(out)) + 1.0
        extra = rng.uniform(0, hi, n_random)
        out += [Fraction(int(e * 8), 8) for e in extra] if exact else list(extra)
    return out


def _tol(*fns, tol):
    return 0 if all(f.exact for f in fns) else tol


# ---------------------------------------------------------------------------
# inverse and composition


def _arr(vals, exact):
    return np.array(list(vals), dtype=object if exact else float)


def _left(f, x):
    """``f(x-)`` with the value 0 at ``x = 0``, elementwise."""
    return left_limit(f, x)


def check_inverse_properties(phi: MonotoneFn, psi: MonotoneFn, zs, tol: float = 1e-9,
                             eps=(Fraction(1, 1000), Fraction(1, 10 ** 6))):
    """The four inverse/composition properties for ``phi``, ``psi`` at levels ``zs``."""
    exact = phi.exact and psi.exact
    t = 0 if exact else tol
    z = _arr(zs, exact)
    bad = []
    comp = compose(phi, psi)
    pz = right_inverse_at(phi, z)
    # (i) phi(phi^{-1}(z) + e) > z
    for e in eps:
        e = e if exact else float(e)
        ok = eval_fn(phi, pz + e) > z - t
        bad += [f"(i) z={v} eps={e}" for v in z[~ok.astype(bool)]]
    cz = right_inverse_at(comp, z)
    qz = right_inverse_at(psi, pz)
    # (ii) (phi o psi)^{-1}(z) <= psi^{-1}(phi^{-1}(z))
    ok = (cz <= qz + t).astype(bool)
    bad += [f"(ii) z={v}" for v in z[~ok]]
    # (iii) phi^{-1}(z) <= psi(cz) <= psi(qz) and psi(qz-) <= phi^{-1}(z)
    a = eval_fn(psi, cz)
    ok = ((pz <= a + t) & (a <= eval_fn(psi, qz) + t)).astype(bool)
    bad += [f"(iii) z={v}" for v in z[~ok]]
    ok = (_left(psi, qz) <= pz + t).astype(bool)
    bad += [f"(iii-) z={v}" for v in z[~ok]]
    # (iv) equality when phi is left-continuous at phi^{-1}(z)
    lc = (_left(phi, pz) == eval_fn(phi, pz)).astype(bool)
    ok = (abs(cz - qz) <= t).astype(bool) | ~lc
    bad += [f"(iv) z={v}" for v in z[~ok]]
    return bad


def check_seesaw(phi: MonotoneFn, xs, ys, tol: float = 1e-9):
    """``phi^{-1}(y) <= x => phi(x) >= y`` and ``phi(x) > y => phi^{-1}(y) <= x``."""
    exact = phi.exact
    t = 0 if exact else tol
    x = _arr(xs, exact)
    y = _arr(ys, exact)
    iy = right_inverse_at(phi, y)
    fx = eval_fn(phi, x)
    if exact:
        # compare exactly on integers over a common denominator
        parts = (iy, fx, x, y)
        den = math.lcm(*(v.denominator for a in parts for v in a))
        ints = [[int(v * den) for v in a] for a in parts]
        small = max(abs(v) for a in ints for v in a) < 2 ** 62
        iy, fx, xi, yi = (np.array(a, dtype=np.int64 if small else object) for a in ints)
    else:
        xi, yi = x, y
    iy, fx = iy[:, None], fx[None, :]
    X, Y = xi[None, :], yi[:, None]
    first = ((iy <= X) & ~(fx >= Y - t)).astype(bool)
    second = ((fx > Y) & ~(iy <= X + t)).astype(bool)
    bad = [f"seesaw(i) x={x[j]} y={y[i]}" for i, j in np.argwhere(first)]
    bad += [f"seesaw(ii) x={x[j]} y={y[i]}" for i, j in np.argwhere(second)]
    return bad


# ---------------------------------------------------------------------------
# metric comparisons


def check_levy_le_sup(phi, psi, K, tol=1e-9):
    r, s = levy_metric(phi, psi, K), float(sup_metric(phi, psi, K))
    return [] if r <= s + tol else [f"levy {r} > sup {s} (K={K})"]


def check_sup_le_levy(phi, psi, K, tol=1e-9):
    """``sup|phi - psi| <= (1 + sup_{x<=K} |phi'|) rho_K`` for absolutely continuous ``phi``."""
    r = levy_metric(phi, psi, K)
    s = float(sup_metric(phi, psi, K))
    bound = (1.0 + float(max_slope(phi, 0.0, K))) * r
    return [] if s <= bound + tol else [f"sup {s} > {bound} (rho={r}, K={K})"]


def check_sup_le_levy_interior(phi, psi, K, tol=1e-9):
    """The same bound with the sup restricted to ``[0, K - rho_K]``.

    On ``(K - rho, K]`` the definition of ``rho_K`` gives no upper control of
    ``psi`` by ``phi``, so this is the form that holds in general.
    """
    r = levy_metric(phi, psi, K)
    if r >= K:
        return []
    s = float(sup_metric(phi, psi, K - r))
    bound = (1.0 + float(max_slope(phi, 0.0, K))) * r
    return [] if s <= bound + tol else [f"interior sup {s} > {bound} (rho={r}, K={K})"]


def check_inverse_levy(phi, psi, K, tol=1e-9):
    """``rho_K(phi^{-1}, psi^{-1}) <= rho_L(min(phi,K), min(psi,K))``."""
    pi, si = right_inverse_fn(phi), right_inverse_fn(psi)
    L = float(max(right_inverse_at(phi, K), right_inverse_at(psi, K)))
    lhs = levy_metric(pi, si, K)
    if L <= 0:
        return [] if lhs <= tol else [f"inverse levy {lhs} with L=0"]
    rhs = levy_metric(truncate_min(phi, K), truncate_min(psi, K), L)
    return [] if lhs <= rhs + tol else [f"inverse levy {lhs} > {rhs} (K={K}, L={L})"]


def inverse_regularity_sides(phi, psi, K):
    """Both sides of the inverse-regularity bound; ``phi`` should have an a.c. inverse."""
    pi, si = right_inverse_fn(phi), right_inverse_fn(psi)
    lhs = float(sup_metric(pi, si, K))
    m = float(min(right_inverse_at(phi, K), right_inverse_at(psi, K)))
    gap = float(sup_metric(phi, psi, m)) if m > 0 else abs(float(eval_fn(phi, 0.0) - eval_fn(psi, 0.0)))
    rhs = (1.0 + float(max_slope(pi, 0.0, K))) * gap
    return lhs, rhs


def check_inverse_regularity(phi, psi, K, tol=1e-9):
    lhs, rhs = inverse_regularity_sides(phi, psi, K)
    return [] if lhs <= rhs + tol else [f"inverse sup {lhs} > {rhs} (K={K})"]


def brute_force_levy(f: MonotoneFn, g: MonotoneFn, K: float, coarse: float = 1e-3,
                     fine: float = 1e-5, n_x: int = 4001) -> float:
    """Levy distance by scanning epsilon grids of shrinking width down to ``fine``.

    The result is within ``fine / 2`` of the infimum.

    Feasibility of each epsilon is tested on a dense x-grid together with the
    shifted breakpoints, each evaluated on both sides.
    """
    f = MonotoneFn(np.asarray(f.knots, float), np.asarray(f.values, float),
                   np.asarray(f.slopes[:-1], float), float(f.tail), check=False)
    g = MonotoneFn(np.asarray(g.knots, float), np.asarray(g.values, float),
                   np.asarray(g.slopes[:-1], float), float(g.tail), check=False)
    base = np.linspace(0.0, K, n_x)

    def val(h, x):
        x = np.asarray(x, float)
        out = np.zeros_like(x)
        pos = x >= 0
        out[pos] = eval_fn(h, x[pos])
        return out

    def lval(h, x):
        x = np.asarray(x, float)
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = left_limit(h, x[pos])
        return out

    def ok(eps):
        for a, b in ((f, g), (g, f)):
            xs = np.concatenate((base, b.knots))
            xs = xs[(xs >= 0) & (xs <= K)]
            if np.any(val(a, xs - eps) - eps >= val(b, xs)):
                return False
            xl = xs[xs > 0]
            if np.any(lval(a, xl - eps) - eps >= lval(b, xl)):
                return False
            # shifted breakpoints, with the shifted function read at the knot itself
            ka = a.knots[a.knots + eps <= K]
            if np.any(val(a, ka) - eps >= val(b, ka + eps)):
                return False
            if np.any(lval(a, ka) - eps >= lval(b, ka + eps)):
                return False
        return True

    # scan cells of width step, then rescan the first feasible cell 10x finer;
    # the infimum lies in the final cell, whose midpoint is returned
    lo, step = 0.0, 10 * coarse
    while True:
        e = lo + step
        while not ok(e):
            e += step
        lo = e - step
        if step <= fine * (1 + 1e-9):
            return e - step / 2
        step = max(step / 10, fine)


# ---------------------------------------------------------------------------
# suite


def property_suite(n_pairs: int = 1000, seed: int = 0, *, exact_share: float = 0.3,
                   metric_pairs: int = 200, K: float = 2.0):
    """Run the algebra and metric checks on random fixtures.

    Returns ``{name: (n_checked, violations)}``.  The inverse-regularity bound
    is reported separately because it can fail near the window edge.
    """
    rng = np.random.default_rng(seed)
    out = {}
    n_ex = int(n_pairs * exact_share)
    bad_a, bad_s = [], []
    for i in range(n_pairs):
        exact = i < n_ex
        phi, psi = random_pair(rng, exact=exact)
        zs = probe_levels(phi, psi, rng=rng)
        bad_a += check_inverse_properties(phi, psi, zs)
        bad_s += check_seesaw(phi, zs, zs)
    out["inverse_properties"] = (n_pairs, bad_a)
    out["seesaw"] = (n_pairs, bad_s)
    b3, b4, b4i, b5, b2 = [], [], [], [], []
    for _ in range(metric_pairs):
        phi, psi = random_pair(rng)
        b3 += check_levy_le_sup(phi, psi, K)
        b5 += check_inverse_levy(phi, psi, K)
        ac = random_monotone(rng, continuous=True, start_zero=True, strict=True)
        b4 += check_sup_le_levy(ac, psi, K)
        b4i += check_sup_le_levy_interior(ac, psi, K)
        b2 += check_inverse_regularity(ac, psi, K)
    out["levy_le_sup"] = (metric_pairs, b3)
    out["sup_le_levy"] = (metric_pairs, b4)
    out["sup_le_levy_interior"] = (metric_pairs, b4i)
    out["inverse_levy"] = (metric_pairs, b5)
    out["inverse_regularity"] = (metric_pairs, b2)
    return out
