"""Numerical substrate: dense float64 vectors, elementwise ops, and a portable RNG.

Everything downstream (problems, optimizers, data generation) draws its
randomness from :class:`Rng`, a counter-based SplitMix64 generator that is
fully specified here so that a given seed yields the same stream on every
platform. The platform/default generators are deliberately not used: the
scale-invariance checks replay the exact same mini-batch index sequence in
two runs, which requires a generator we control bit-for-bit.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DimensionError",
    "Rng",
    "as_vector",
    "elementwise",
    "sample_batch",
]


class DimensionError(ValueError):
    """Vector lengths do not agree."""


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array and reject non-finite entries."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


_ELEMENTWISE_BINARY = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.divide,
}
_ELEMENTWISE_UNARY = {
    "sqrt": np.sqrt,
    "square": np.square,
}


def elementwise(op: str, a, b=None) -> np.ndarray:
    """Coordinate-wise arithmetic on equal-length vectors.

    ``op`` is one of add/sub/mul/div (binary) or sqrt/square (unary).
    Division follows IEEE-754 semantics; zero divisors are the caller's
    responsibility (the result may contain inf/nan).
    """
    a = np.asarray(a, dtype=np.float64)
    if op in _ELEMENTWISE_UNARY:
        if b is not None:
            raise ValueError(f"elementwise '{op}' takes a single operand")
        return _ELEMENTWISE_UNARY[op](a)
    if op not in _ELEMENTWISE_BINARY:
        raise ValueError(f"unknown elementwise op {op!r}")
    if b is None:
        raise ValueError(f"elementwise '{op}' needs two operands")
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")
    with np.errstate(divide="ignore", invalid="ignore"):
        return _ELEMENTWISE_BINARY[op](a, b)


# SplitMix64 constants (Steele, Lea & Flood's splittable generator; also the
# seeding mix of the xoshiro family). The state is a Weyl sequence advanced
# by the golden-ratio increment; outputs come from the two-round finalizer.
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1
_U64 = np.uint64

_TWO_POW_NEG53 = 2.0**-53


class Rng:
    """Deterministic SplitMix64 stream.

    Identical seeds produce identical output sequences regardless of
    platform, because every transform below is pinned:

    * raw output: SplitMix64 finalizer applied to ``seed + k * golden``
      for draw counter ``k`` (counter-based, so blocks vectorize);
    * uniforms on (0,1): ``((raw >> 11) + 0.5) * 2**-53`` (strictly open);
    * normals: Box-Muller, each variate consuming exactly two uniforms
      ``sqrt(-2 ln u1) * cos(2 pi u2)`` (the sine partner is discarded);
    * integers on [0, n): ``((raw >> 11) * n) >> 53`` in exact integer
      arithmetic.
    """

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK
        self._seed = int(seed) & _MASK

    @property
    def seed(self) -> int:
        return self._seed

    def _raw(self, count: int) -> np.ndarray:
        """Next ``count`` raw 64-bit outputs, advancing the counter."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        steps = np.arange(1, count + 1, dtype=np.uint64)
        z = _U64(self._state) + steps * _U64(_GOLDEN)
        self._state = (self._state + count * _GOLDEN) & _MASK
        z = (z ^ (z >> _U64(30))) * _MIX1
        z = (z ^ (z >> _U64(27))) * _MIX2
        return z ^ (z >> _U64(31))

    def uniforms01(self, count: int) -> np.ndarray:
        """``count`` doubles strictly inside (0, 1)."""
        bits = (self._raw(count) >> _U64(11)).astype(np.float64)
        return (bits + 0.5) * _TWO_POW_NEG53

    def uniforms(self, a: float, b: float, count: int) -> np.ndarray:
        """``count`` uniform doubles on (a, b)."""
        if not a < b:
            raise ValueError(f"need a < b, got a={a}, b={b}")
        return a + (b - a) * self.uniforms01(count)

    def uniform(self, a: float, b: float) -> float:
        return float(self.uniforms(a, b, 1)[0])

    def normals(self, count: int) -> np.ndarray:
        """``count`` standard normal variates (Box-Muller, 2 uniforms each)."""
        u = self.uniforms01(2 * count)
        r = np.sqrt(-2.0 * np.log(u[0::2]))
        return r * np.cos(2.0 * np.pi * u[1::2])

    def standard_normal(self) -> float:
        return float(self.normals(1)[0])

    def integers(self, n: int, count: int) -> np.ndarray:
        """``count`` independent uniform draws from {0, ..., n-1}."""
        if n < 1:
            raise ValueError("n must be >= 1")
        raw = self._raw(count) >> _U64(11)
        if n < 2048:
            # (2^53 - 1) * 2047 < 2^64: the product stays exact in uint64.
            idx = (raw * _U64(n)) >> _U64(53)
            return idx.astype(np.int64)
        out = [(int(z) * n) >> 53 for z in raw]
        return np.asarray(out, dtype=np.int64)


def sample_batch(rng: Rng, n: int, batch: int) -> np.ndarray:
    """Indices of a size-``batch`` i.i.d. uniform sample (with replacement).

    Raises if the dataset is empty or the batch size is not positive.
    """
    if n < 1:
        raise ValueError("cannot sample from an empty dataset (n = 0)")
    if batch < 1:
        raise ValueError("batch size must be >= 1")
    return rng.integers(n, batch)
