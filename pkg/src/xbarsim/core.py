"""Shared numerical primitives.

Reference linear algebra (the oracle every physical readout path is checked
against), central finite differences for gradient verification, and
addressable pseudorandom streams for reproducible Monte-Carlo sweeps.
All arithmetic is float64.
"""

from __future__ import annotations

import zlib
from typing import Callable

import numpy as np

from .errors import ShapeError

__all__ = [
    "as_matrix",
    "as_vector",
    "matvec_ref",
    "finite_diff_grad",
    "RandomStream",
    "seeded_stream",
]


def as_vector(x, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"{name} must be one-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be two-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def matvec_ref(x, w) -> np.ndarray:
    """Reference vector-matrix product y = x^T W in double precision."""
    xv = as_vector(x, "x")
    wm = as_matrix(w, "W")
    if xv.shape[0] != wm.shape[0]:
        raise ShapeError(
            f"input length {xv.shape[0]} does not match matrix rows {wm.shape[0]}"
        )
    return xv @ wm


def finite_diff_grad(f: Callable[[np.ndarray], float], w, h: float) -> np.ndarray:
    """Central-difference gradient (f(w + h e_i) - f(w - h e_i)) / 2h."""
    wv = as_vector(w, "w")
    if not h > 0.0:
        raise ValueError("step h must be positive")
    grad = np.empty_like(wv)
    for i in range(wv.size):
        step = np.zeros_like(wv)
        step[i] = h
        f_plus = float(f(wv + step))
        f_minus = float(f(wv - step))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise ValueError(f"function returned a non-finite value near coordinate {i}")
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def _key_part(part) -> int:
    """Normalize a substream id to a non-negative integer."""
    if isinstance(part, (bool,)):
        raise TypeError("stream ids must be integers or strings, not bool")
    if isinstance(part, (int, np.integer)):
        value = int(part)
        if value < 0:
            raise ValueError("stream ids must be non-negative")
        return value
    if isinstance(part, str):
        # crc32 is stable across platforms and Python versions.
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"stream id must be int or str, got {type(part).__name__}")


class RandomStream:
    """Addressable, platform-stable pseudorandom stream.

    Wraps the counter-based Philox generator keyed through numpy's
    SeedSequence by (seed, stream_id, *substream ids). The same address names
    the same sequence on every platform and across process restarts; distinct
    addresses give statistically independent streams. Substreams are derived
    from the address rather than from generator state, so streams behave as
    values: forking never perturbs the parent.
    """

    def __init__(self, seed: int, stream_id=0, _key: tuple = ()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = _key_part(stream_id)
        self._key = tuple(int(k) for k in _key)
        spawn_key = (self.stream_id, *self._key)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=spawn_key)
        self._gen = np.random.Generator(np.random.Philox(seq))

    def substream(self, *ids) -> "RandomStream":
        """Independent child stream addressed by the given ids."""
        extra = tuple(_key_part(i) for i in ids)
        return RandomStream(self.seed, self.stream_id, self._key + extra)

    # -- draws ------------------------------------------------------------

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def lognormal_median1(self, sigma: float, size=None):
        """Lognormal factors exp(sigma * N(0, 1)); median exactly 1."""
        return np.exp(sigma * self._gen.standard_normal(size))

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def derive_seed(self, *ids) -> int:
        """Stable 63-bit integer derived from this stream's address plus ids.

        Used to label experiment repetitions with a recordable seed.
        """
        extra = tuple(_key_part(i) for i in ids)
        seq = np.random.SeedSequence(
            entropy=self.seed, spawn_key=(self.stream_id, *self._key, *extra)
        )
        return int(seq.generate_state(1, np.uint64)[0] >> 1)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id}, key={self._key})"


def seeded_stream(seed: int, stream_id=0) -> RandomStream:
    """Construct the stream addressed by (seed, stream_id)."""
    return RandomStream(seed, stream_id)
