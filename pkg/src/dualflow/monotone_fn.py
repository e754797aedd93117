"""Exact algebra on nondecreasing right-continuous maps of [0, inf).

A :class:`MonotoneFn` is stored as a finite list of knots ``0 = x_0 < ... < x_m``
with one affine piece per interval ``[x_i, x_{i+1})`` and an affine tail on
``[x_m, inf)``.  Constant pieces are affine pieces with slope zero.  The value
stored at a knot is the right limit, so every instance is right-continuous by
construction.  The left limit at zero is taken to be ``0``.

All arrays may be ``float64`` or ``object`` arrays of :class:`fractions.Fraction`.
With fractions every operation below is exact and comparisons use no tolerance.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "TOL",
    "MonotoneFn",
    "InverseUndefinedError",
    "eval_fn",
    "left_limit",
    "right_inverse_at",
    "right_inverse_fn",
    "compose",
    "jump_set",
    "flat_image_set",
    "rd_condition",
    "levy_metric",
    "sup_metric",
    "truncate_min",
    "max_slope",
]

#: Absolute tolerance for comparing float breakpoint values.
TOL = 1e-12
# Slack allowed when validating monotonicity of float input.
_CHECK_TOL = 1e-9


class InverseUndefinedError(ValueError):
    """Raised when a right-continuous inverse would take the value +inf."""


def _as_array(seq):
    seq = list(seq)
    if any(isinstance(v, Fraction) for v in seq):
        return np.array([Fraction(v) for v in seq], dtype=object)
    return np.asarray(seq, dtype=float)


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    return format(float(v), ".17g")


def _parse_num(tok: str):
    tok = tok.strip()
    if "/" in tok:
        return Fraction(tok)
    return float(tok)


class MonotoneFn:
    """A nondecreasing, right-continuous, piecewise-affine map ``[0,inf) -> [0,inf)``.

    Parameters
    ----------
    knots : sequence
        Strictly increasing abscissae starting at 0.
    values : sequence
        Right-limit value at each knot.
    slopes : sequence
        Slope of each bounded piece, one fewer entry than ``knots``.
    tail : number
        Slope on ``[knots[-1], inf)``.  A positive tail means the map tends
        to infinity, which is what makes the inverse finite everywhere.
    """

    __slots__ = ("knots", "values", "slopes", "_levels_cache")

    def __init__(self, knots, values, slopes, tail=0.0, *, check=True):
        knots = _as_array(knots)
        values = _as_array(values)
        slopes = _as_array(list(slopes) + [tail])
        exact = knots.dtype == object or values.dtype == object or slopes.dtype == object
        if exact:
            knots, values, slopes = (np.array([Fraction(v) for v in a], dtype=object)
                                     for a in (knots, values, slopes))
        self.knots = knots
        self.values = values
        self.slopes = slopes
        self._levels_cache = None
        for arr in (knots, values, slopes):
            arr.setflags(write=False)
        if check:
            self._validate()

    # -- construction helpers -------------------------------------------------

    @classmethod
    def identity(cls, exact=False):
        one = Fraction(1) if exact else 1.0
        return cls([0 * one], [0 * one], [], one)

    @classmethod
    def affine(cls, slope, intercept=0.0):
        """``x -> intercept + slope * x``."""
        return cls([0 * slope], [intercept], [], slope)

    @classmethod
    def constant(cls, value):
        return cls([0 * value], [value], [], 0 * value)

    @classmethod
    def from_points(cls, xs, ys, tail=None):
        """Linear interpolation through ``(xs, ys)`` with a flat piece on ``[0, xs[0])``.

        ``tail`` defaults to the slope of the last interpolation segment.
        """
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size == 0:
            raise ValueError("xs and ys must be equal-length 1-d sequences")
        if np.any(np.diff(xs) <= 0) or xs[0] < 0:
            raise ValueError("xs must be nonnegative and strictly increasing")
        slopes = np.diff(ys) / np.diff(xs)
        if tail is None:
            tail = slopes[-1] if slopes.size else 0.0
        if xs[0] > 0:
            knots = np.concatenate(([0.0], xs))
            values = np.concatenate(([ys[0]], ys))
            slopes = np.concatenate(([0.0], slopes))
        else:
            knots, values = xs, ys
        return cls(knots, values, slopes, max(float(tail), 0.0))

    # -- basic properties -----------------------------------------------------

    @property
    def exact(self) -> bool:
        return self.knots.dtype == object

    @property
    def tol(self):
        return 0 if self.exact else TOL

    @property
    def tail(self):
        return self.slopes[-1]

    @property
    def n_pieces(self) -> int:
        return len(self.knots)

    def _ends(self):
        """Left limit at the right end of each bounded piece."""
        return self.values[:-1] + self.slopes[:-1] * np.diff(self.knots)

    def _validate(self):
        k, v, s = self.knots, self.values, self.slopes
        if k.ndim != 1 or len(k) == 0 or len(v) != len(k) or len(s) != len(k):
            raise ValueError("knots, values and slopes have inconsistent lengths")
        if k[0] != 0:
            raise ValueError("first knot must be 0")
        if len(k) > 1 and not all(np.diff(k) > 0):
            raise ValueError("knots must be strictly increasing")
        slack = 0 if self.exact else _CHECK_TOL
        if any(x < 0 for x in s):
            raise ValueError("slopes must be nonnegative")
        if any(x < -slack for x in v):
            raise ValueError("values must be nonnegative")
        if len(k) > 1:
            ends = self._ends()
            if any(e > nxt + slack * max(1.0, abs(float(nxt))) for e, nxt in zip(ends, v[1:])):
                raise ValueError("function decreases across a knot")

    # -- evaluation -----------------------------------------------------------

    def _piece(self, x, side="right"):
        return np.searchsorted(self.knots, x, side=side) - 1

    def __call__(self, x):
        return eval_fn(self, x)

    def left(self, x):
        return left_limit(self, x)

    def inverse(self):
        return right_inverse_fn(self)

    # -- misc -----------------------------------------------------------------

    def simplify(self):
        """Drop knots where the function is continuous with unchanged slope."""
        k, v, s = self.knots, self.values, self.slopes
        if len(k) < 2:
            return self
        tol = self.tol
        ends = self._ends()
        keep = [0]
        for i in range(1, len(k)):
            j = keep[-1]
            cont = abs(ends[i - 1] - v[i]) <= tol
            same = abs(s[i] - s[j]) <= tol * max(1, abs(s[j]))
            # the merged piece must still reproduce v[i] from the kept left end
            pred = v[j] + s[j] * (k[i] - k[j])
            if not (cont and same and abs(pred - v[i]) <= 10 * tol * max(1, abs(v[i]))):
                keep.append(i)
        if len(keep) == len(k):
            return self
        idx = np.array(keep)
        return MonotoneFn(k[idx], v[idx], s[idx][:-1], s[idx][-1], check=False)

    def to_record(self) -> str:
        """Text record ``knots=[..]; values=[..]; slopes=[..]; tail=s``."""
        def lst(a):
            return "[" + ", ".join(_fmt(x) for x in a) + "]"
        return (f"knots={lst(self.knots)}; values={lst(self.values)}; "
                f"slopes={lst(self.slopes[:-1])}; tail={_fmt(self.tail)}")

    @classmethod
    def from_record(cls, text: str) -> "MonotoneFn":
        fields = {}
        for part in text.strip().split(";"):
            if not part.strip():
                continue
            key, _, raw = part.partition("=")
            raw = raw.strip()
            if raw.startswith("["):
                inner = raw.strip("[]").strip()
                fields[key.strip()] = [_parse_num(t) for t in inner.split(",")] if inner else []
            else:
                fields[key.strip()] = _parse_num(raw)
        try:
            return cls(fields["knots"], fields["values"], fields["slopes"], fields["tail"])
        except KeyError as exc:
            raise ValueError(f"record is missing field {exc}") from None

    def __repr__(self):
        return f"MonotoneFn({self.to_record()})"

    def __eq__(self, other):
        if not isinstance(other, MonotoneFn):
            return NotImplemented
        return (len(self.knots) == len(other.knots)
                and all(np.asarray(self.knots == other.knots))
                and all(np.asarray(self.values == other.values))
                and all(np.asarray(self.slopes == other.slopes)))

    __hash__ = None


# ---------------------------------------------------------------------------
# pointwise operations


def _check_nonneg(x):
    arr = np.asarray(x)
    if arr.dtype == object:
        bad = any(v < 0 for v in arr.ravel())
    else:
        bad = bool(np.any(arr < 0)) or bool(np.any(np.isnan(arr)))
    if bad:
        raise ValueError("MonotoneFn is defined on [0, inf); got a negative argument")


def eval_fn(f: MonotoneFn, x):
    """Evaluate ``f`` at ``x >= 0`` (scalar or array), right-continuous at knots."""
    _check_nonneg(x)
    i = f._piece(x, "right")
    out = f.values[i] + f.slopes[i] * (x - f.knots[i])
    if isinstance(out, np.ndarray) and out.ndim == 0:
        return out[()]
    return out


def left_limit(f: MonotoneFn, x):
    """``f(x-)``; the left limit at 0 is 0 by convention."""
    _check_nonneg(x)
    xa = np.asarray(x, dtype=f.knots.dtype)
    i = np.maximum(f._piece(xa, "left"), 0)
    out = f.values[i] + f.slopes[i] * (xa - f.knots[i])
    out = np.where(xa == 0, 0 * out, out)
    if out.ndim == 0:
        return out[()]
    return out


def _levels(f: MonotoneFn):
    """Interleaved ``v_0, e_0, v_1, e_1, ..., v_m``: the nondecreasing sequence of
    piece start values and piece end limits."""
    cached = f._levels_cache
    if cached is not None:
        return cached
    v = f.values
    if len(v) == 1:
        c = v.copy()
    else:
        ends = f._ends()
        if not f.exact:
            ends = np.minimum(ends, v[1:])
        c = np.empty(2 * len(v) - 1, dtype=v.dtype)
        c[0::2] = v
        c[1::2] = ends
    c.setflags(write=False)
    f._levels_cache = c
    return c


def right_inverse_at(f: MonotoneFn, z):
    """``inf{y >= 0 : f(y) > z}`` for scalar or array ``z >= 0``."""
    if not f.tail > 0:
        raise InverseUndefinedError("tail slope is 0: the inverse may be infinite")
    _check_nonneg(z)
    c = _levels(f)
    m = len(f.knots) - 1
    j = np.searchsorted(c, z, side="right")
    i = np.minimum(j // 2, m)
    on_slope = (j % 2 == 1) | (j == 2 * m + 1)
    s = f.slopes[i]
    safe = np.where(on_slope, s, 1 + 0 * s)
    y = f.knots[i] + np.where(on_slope, (z - f.values[i]) / safe, 0 * s)
    if not f.exact:
        upper = np.where(i < m, f.knots[np.minimum(i + 1, m)], np.inf)
        y = np.clip(y, f.knots[i], upper)
    if np.ndim(y) == 0:
        return y[()] if isinstance(y, np.ndarray) else y
    return y


def right_inverse_fn(f: MonotoneFn) -> MonotoneFn:
    """The right-continuous inverse as a :class:`MonotoneFn`.

    Flat pieces of ``f`` become jumps of the inverse and jumps of ``f`` become
    flat pieces.
    """
    if not f.tail > 0:
        raise InverseUndefinedError("tail slope is 0: the inverse may be infinite")
    k, v, s = f.knots, f.values, f.slopes
    zero = 0 * v[0]
    one = zero + 1
    ends = f._ends() if len(k) > 1 else v[:0]
    if not f.exact and len(k) > 1:
        ends = np.minimum(ends, v[1:])
    # (start level, inverse value, inverse slope)
    pieces = []
    if v[0] > 0:
        pieces.append((zero, zero, zero))
    for i in range(len(k) - 1):
        if s[i] > 0 and ends[i] > v[i]:
            pieces.append((v[i], k[i], one / s[i]))
        if v[i + 1] > ends[i]:
            pieces.append((ends[i], k[i + 1], zero))
    pieces.append((v[-1], k[-1], one / s[-1]))
    return _from_pieces(pieces, f.tol, exact=f.exact)


def _from_pieces(pieces, tol, exact):
    """Assemble a MonotoneFn from (start, value, slope) triples sorted by start.

    When two starts coincide (within ``tol``) the later triple wins, which is
    exactly right-continuity.
    """
    out = []
    for p in pieces:
        if out and p[0] - out[-1][0] <= tol:
            out[-1] = (out[-1][0], p[1], p[2])
        else:
            out.append(p)
    starts = [p[0] for p in out]
    starts[0] = 0 * starts[0]
    vals = [p[1] for p in out]
    slopes = [p[2] for p in out]
    if not exact:
        vals = list(np.maximum.accumulate(np.maximum(np.asarray(vals, dtype=float), 0.0)))
    return MonotoneFn(starts, vals, slopes[:-1], slopes[-1], check=False)


def compose(outer: MonotoneFn, inner: MonotoneFn) -> MonotoneFn:
    """``x -> outer(inner(x))`` with an exact breakpoint representation."""
    exact = outer.exact or inner.exact
    if exact and not (outer.exact and inner.exact):
        raise TypeError("cannot mix exact and float MonotoneFn values")
    ok, ov, osl = outer.knots, outer.values, outer.slopes
    k, v, s = inner.knots, inner.values, inner.slopes
    m = len(k) - 1
    pieces = []
    for i in range(m + 1):
        a = k[i]
        start = v[i]
        j = int(np.searchsorted(ok, start, side="right")) - 1
        pieces.append((a, ov[j] + osl[j] * (start - ok[j]), osl[j] * s[i]))
        if s[i] > 0:
            end = v[i] + s[i] * (k[i + 1] - a) if i < m else None
            stop = len(ok) if end is None else int(np.searchsorted(ok, end, side="left"))
            for jj in range(j + 1, stop):
                x = a + (ok[jj] - start) / s[i]
                if not exact:
                    x = min(x, np.nextafter(k[i + 1], -np.inf)) if i < m else x
                    x = max(x, a)
                pieces.append((x, ov[jj], osl[jj] * s[i]))
    return _from_pieces(pieces, 0 if exact else TOL, exact)


# ---------------------------------------------------------------------------
# jump and flat sets


def jump_set(f: MonotoneFn) -> np.ndarray:
    """``D(f) = {x >= 0 : f(x-) != f(x)}``; contains 0 iff ``f(0) > 0``."""
    tol = f.tol
    out = []
    if f.values[0] > tol:
        out.append(f.knots[0])
    if len(f.knots) > 1:
        gaps = f.values[1:] - f._ends()
        out.extend(x for x, g in zip(f.knots[1:], gaps) if g > tol)
    return np.array(out, dtype=f.knots.dtype)


def flat_image_set(f: MonotoneFn) -> np.ndarray:
    """``R(f)``: values taken on a nondegenerate flat piece."""
    tol = f.tol
    vals = sorted(v for v, s in zip(f.values, f.slopes) if s == 0)
    out = []
    for v in vals:
        if not out or v - out[-1] > tol:
            out.append(v)
    return np.array(out, dtype=f.values.dtype)


def rd_condition(first: MonotoneFn, second: MonotoneFn) -> bool:
    """True iff ``R(first)`` and ``D(second)`` are disjoint."""
    r = flat_image_set(first)
    d = jump_set(second)
    tol = max(first.tol, second.tol)
    return not any(abs(a - b) <= tol for a in r for b in d)


# ---------------------------------------------------------------------------
# metrics


def _shift_eval(f: MonotoneFn, x, left: bool):
    """f(x) (or f(x-)) with f := 0 on (-inf, 0) and f(0-) = 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    if left:
        pos = x > 0
        if np.any(pos):
            out[pos] = left_limit(f, x[pos])
    else:
        pos = x >= 0
        if np.any(pos):
            out[pos] = eval_fn(f, x[pos])
    return out


def _sup_shifted_gap(f: MonotoneFn, g: MonotoneFn, eps: float, K: float) -> float:
    """``sup_{0<=x<=K} f(x - eps) - g(x)`` evaluated on the merged breakpoints.

    At shifted knots ``x = k + eps`` the shifted function is read at ``k``
    itself, since ``(k + eps) - eps`` may round to the wrong side of a jump.
    """
    kf = f.knots[(f.knots + eps >= 0) & (f.knots + eps <= K)]
    xs = kf + eps
    best = -np.inf
    if kf.size:
        best = float(np.max(eval_fn(f, kf) - eval_fn(g, xs)))
        lf = _shift_eval(f, kf, left=True)
        pos = xs > 0
        if np.any(pos):
            best = max(best, float(np.max(lf[pos] - left_limit(g, xs[pos]))))
    cand = np.concatenate((g.knots, [0.0, K]))
    cand = np.unique(cand[(cand >= 0) & (cand <= K)])
    best = max(best, float(np.max(_shift_eval(f, cand - eps, left=False) - eval_fn(g, cand))))
    lc = cand[cand > 0]
    if lc.size:
        lft = _shift_eval(f, lc - eps, left=True) - left_limit(g, lc)
        best = max(best, float(np.max(lft)))
    return best


def _float_fn(f: MonotoneFn) -> MonotoneFn:
    if not f.exact:
        return f
    return MonotoneFn(f.knots.astype(float), f.values.astype(float),
                      f.slopes[:-1].astype(float), float(f.tail), check=False)


def levy_metric(f: MonotoneFn, g: MonotoneFn, K: float, tol: float = TOL) -> float:
    """Levy-type distance on ``[0, K]``.

    ``inf{eps > 0 : f(x-eps) - eps < g(x) and g(x-eps) - eps < f(x) for all
    x in [0, K]}`` with both functions taken to be 0 on the negative axis.
    The largest shifted gap minus ``eps`` is strictly decreasing in ``eps``,
    so its sign change is bracketed with Brent's method; each evaluation is
    exact on the breakpoint structure.  The returned value is feasible and
    within ``tol`` of the infimum.
    """
    if not K > 0:
        raise ValueError("K must be positive")
    f, g = _float_fn(f), _float_fn(g)
    K = float(K)

    def excess(eps):
        return max(_sup_shifted_gap(f, g, eps, K), _sup_shifted_gap(g, f, eps, K)) - eps

    if excess(0.0) <= 0.0:
        return 0.0
    hi = float(sup_metric(f, g, K)) + tol
    while not excess(hi) < 0:
        hi *= 2.0
    r = brentq(excess, 0.0, hi, xtol=tol / 4, rtol=4 * np.finfo(float).eps)
    # brentq may stop just below a jump of the excess; step onto the feasible side
    step = tol / 4
    while not excess(r) < 0:
        r = min(r + step, hi)
        step *= 2
    return r


def sup_metric(f: MonotoneFn, g: MonotoneFn, K):
    """``sup_{0<=x<=K} |f(x) - g(x)|``, exact on the merged breakpoints."""
    if not K > 0:
        raise ValueError("K must be positive")
    exact = f.exact and g.exact
    dtype = object if exact else float
    if not exact:
        f, g = _float_fn(f), _float_fn(g)
    cand = np.concatenate((f.knots, g.knots, np.array([0 * K, K], dtype=dtype)))
    cand = np.unique(cand[(cand >= 0) & (cand <= K)])
    best = max(abs(a - b) for a, b in zip(np.atleast_1d(eval_fn(f, cand)),
                                          np.atleast_1d(eval_fn(g, cand))))
    lc = cand[cand > 0]
    if lc.size:
        best = max(best, max(abs(a - b) for a, b in zip(np.atleast_1d(left_limit(f, lc)),
                                                        np.atleast_1d(left_limit(g, lc)))))
    return best if exact else float(best)


def truncate_min(f: MonotoneFn, K) -> MonotoneFn:
    """Pointwise ``min(f, K)``."""
    if not K > 0:
        raise ValueError("K must be positive")
    k, v, s = f.knots, f.values, f.slopes
    zero = 0 * v[0]
    pieces = []
    m = len(k) - 1
    for i in range(m + 1):
        if v[i] >= K:
            pieces.append((k[i], K + zero, zero))
            break
        end = v[i] + s[i] * (k[i + 1] - k[i]) if i < m else None
        if s[i] > 0 and (end is None or end > K):
            pieces.append((k[i], v[i], s[i]))
            cross = k[i] + (K - v[i]) / s[i]
            pieces.append((cross, K + zero, zero))
            break
        pieces.append((k[i], v[i], s[i]))
    return _from_pieces(pieces, f.tol, f.exact)


def max_slope(f: MonotoneFn, a, b):
    """Largest slope of ``f`` over pieces that meet ``[a, b]``."""
    k = f.knots
    lo = max(int(np.searchsorted(k, a, side="right")) - 1, 0)
    hi = int(np.searchsorted(k, b, side="left"))
    hi = max(hi, lo + 1)
    return max(f.slopes[lo:hi])


def is_continuous(f: MonotoneFn) -> bool:
    """No jumps on [0, inf), counting a jump at 0 when f(0) > 0."""
    return jump_set(f).size == 0
