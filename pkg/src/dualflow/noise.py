"""Wiener increments on a uniform grid, generated counter-style.

Every Gaussian draw is a pure function of ``(seed, stream_id, level, index)``
through a SplitMix64 hash, so any sub-window of any stream can be produced
in any order, vectorised across streams, with bit-identical results.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtri

__all__ = [
    "TimeGrid",
    "NoisePath",
    "gaussians",
    "stream_ids",
    "stable_hash",
    "sample_increments",
    "refine_increments",
    "sample_noise",
    "time_reverse",
    "refine_noise",
]

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z):
    z = z + _GAMMA
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _u64(x):
    return np.asarray(x).astype(np.int64).view(np.uint64) if np.asarray(x).dtype.kind == "i" \
        else np.asarray(x, dtype=np.uint64)


def stable_hash(*parts) -> int:
    """Deterministic 64-bit hash of strings and integers (independent of PYTHONHASHSEED)."""
    h = np.array([0x243F6A8885A308D3], dtype=np.uint64)
    for p in parts:
        data = str(p).encode()
        for i in range(0, len(data), 8):
            chunk = int.from_bytes(data[i:i + 8].ljust(8, b"\0"), "little")
            h = _mix(h ^ np.array([chunk], dtype=np.uint64))
        h = _mix(h ^ np.array([len(data)], dtype=np.uint64))
    return int(h[0])


def stream_ids(tag, n: int, offset: int = 0) -> np.ndarray:
    """``n`` consecutive stream ids for a named unit of work."""
    base = np.uint64(stable_hash(tag))
    with np.errstate(over="ignore"):
        return base + np.arange(offset, offset + n, dtype=np.uint64)


def gaussians(seed, streams, level, index) -> np.ndarray:
    """Standard normals keyed by ``(seed, stream, level, index)``; broadcasts."""
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF) ^ np.uint64(0x5851F42D4C957F2D))
        h = _mix(h ^ _u64(streams))
        h = _mix(h ^ (np.uint64(int(level)) * np.uint64(0xD1B54A32D192ED03)))
        h = _mix(h ^ _u64(index))
    u = ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)
    return ndtri(u)


# ---------------------------------------------------------------------------
# array-level generation (rows = streams, columns = steps)


def sample_increments(seed, streams, k_lo: int, k_hi: int, h: float) -> np.ndarray:
    """Increments ``dw_k``, ``k_lo < k <= k_hi``, shape ``(len(streams), k_hi - k_lo)``."""
    if k_hi <= k_lo:
        raise ValueError("empty window")
    streams = np.atleast_1d(np.asarray(streams, dtype=np.uint64))
    ks = np.arange(k_lo + 1, k_hi + 1, dtype=np.int64)
    return np.sqrt(h) * gaussians(seed, streams[:, None], 0, ks[None, :])


def refine_increments(incs, seed, streams, k_lo: int, h: float, levels: int,
                      level0: int = 0) -> np.ndarray:
    """Split every increment into ``2**levels`` Brownian-bridge children.

    ``incs`` has shape ``(S, n)`` and holds level-``level0`` increments over
    steps of length ``h``.  Each halving draws one normal keyed by the parent's
    global fine index, so refining twice by one level is bit-identical to
    refining once by two.
    """
    out = np.asarray(incs, dtype=float)
    streams = np.atleast_1d(np.asarray(streams, dtype=np.uint64))
    step = h
    for lev in range(level0, level0 + levels):
        n = out.shape[1]
        first = k_lo * 2 ** (lev - level0) + 1
        idx = np.arange(first, first + n, dtype=np.int64)
        z = gaussians(seed, streams[:, None], lev + 1, idx[None, :])
        left = 0.5 * out + 0.5 * np.sqrt(step) * z
        right = out - left
        nxt = np.empty((out.shape[0], 2 * n))
        nxt[:, 0::2] = left
        nxt[:, 1::2] = right
        out = nxt
        step = step / 2
    return out


# ---------------------------------------------------------------------------
# object API


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k*h`` with ``h = T/n``."""

    T: float
    n: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")

    @property
    def h(self) -> float:
        return self.T / self.n

    def times(self, k_lo: int = 0, k_hi: int | None = None) -> np.ndarray:
        k_hi = self.n if k_hi is None else k_hi
        return np.arange(k_lo, k_hi + 1) * self.h

    def refined(self, r: int) -> "TimeGrid":
        return TimeGrid(self.T, self.n * 2 ** r)


@dataclass(frozen=True)
class NoisePath:
    """Increments ``dw_k`` for ``k_lo < k <= k_hi`` on a grid of step ``h``.

    ``level`` counts bridge refinements (step ``h`` is already the refined
    step).  ``reversed`` marks a path produced by :func:`time_reverse`; it keeps
    refinement consistent with the original stream.
    """

    k_lo: int
    k_hi: int
    h: float
    increments: np.ndarray
    seed: int
    stream_id: int
    level: int = 0
    reversed: bool = False

    def __post_init__(self):
        if self.k_hi <= self.k_lo:
            raise ValueError("empty window")
        if len(self.increments) != self.k_hi - self.k_lo:
            raise ValueError("increment count does not match the window")

    @property
    def n(self) -> int:
        return self.k_hi - self.k_lo

    def indices(self) -> np.ndarray:
        return np.arange(self.k_lo + 1, self.k_hi + 1)

    def times(self) -> np.ndarray:
        return self.indices() * self.h


def sample_noise(grid: TimeGrid, window=None, seed: int = 0, stream_id: int = 0) -> NoisePath:
    """Draw ``dw_k ~ N(0, h)`` on ``window = (k_lo, k_hi)`` (default ``(0, n)``)."""
    k_lo, k_hi = (0, grid.n) if window is None else window
    if k_hi <= k_lo:
        raise ValueError("empty window")
    incs = sample_increments(seed, [stream_id], k_lo, k_hi, grid.h)[0]
    return NoisePath(k_lo, k_hi, grid.h, incs, int(seed), int(stream_id))


def time_reverse(noise: NoisePath) -> NoisePath:
    """Mirror the window and negate: the new increment at ``k+1`` is ``-dw_{-k}``."""
    return replace(noise, k_lo=-noise.k_hi, k_hi=-noise.k_lo,
                   increments=-noise.increments[::-1], reversed=not noise.reversed)


def refine_noise(noise: NoisePath, levels: int) -> NoisePath:
    """Brownian-bridge refinement of every increment into ``2**levels`` parts."""
    if levels < 0:
        raise ValueError("levels must be >= 0")
    if levels == 0:
        return noise
    if noise.reversed:
        return time_reverse(refine_noise(time_reverse(noise), levels))
    fine = refine_increments(noise.increments[None, :], noise.seed, [noise.stream_id],
                             noise.k_lo, noise.h, levels, level0=noise.level)[0]
    f = 2 ** levels
    return NoisePath(noise.k_lo * f, noise.k_hi * f, noise.h / f, fine, noise.seed,
                     noise.stream_id, noise.level + levels, False)
