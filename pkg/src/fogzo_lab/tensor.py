"""Dense float64 linear algebra helpers and deterministic, splittable RNG.

Matrices are plain ``numpy.ndarray`` with dtype float64.  The RNG wraps
numpy's Philox counter-based generator so that substreams obtained via
:func:`fork_stream` are statistically independent and fully reproducible:
the same ``(seed, stream)`` pair always yields the same sample sequence,
no matter where in the program it is created.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ShapeMismatchError(ValueError):
    """Raised when operand shapes are incompatible."""


def as_matrix(data) -> np.ndarray:
    """Coerce to a float64 C-contiguous array."""
    return np.ascontiguousarray(data, dtype=np.float64)


def check_finite(a: np.ndarray, context: str = "result") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise FloatingPointError(f"non-finite values in {context}")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with explicit shape checking, f64 accumulation."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeMismatchError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return check_finite(a @ b, "matmul")


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.float64)


@dataclass
class Rng:
    """Deterministic random stream addressed by (seed, stream path).

    ``stream`` is a tuple of indices; each :func:`fork_stream` call appends
    one index, so forks of forks remain independent.  The underlying
    generator is stateful (draws advance it), but reconstructing an ``Rng``
    with the same seed and stream replays the identical sequence.
    """

    seed: int
    stream: tuple[int, ...] = ()
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        self._gen = np.random.Generator(np.random.Philox(ss))

    # -- scalar / array draws -------------------------------------------

    def uniform(self, lo: float, hi: float, size=None):
        if not lo < hi:
            raise ValueError(f"uniform requires lo < hi, got lo={lo}, hi={hi}")
        return self._gen.uniform(lo, hi, size=size)

    def random(self, size=None):
        return self._gen.random(size=size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size=size)

    def integers(self, lo: int, hi: int, size=None):
        return self._gen.integers(lo, hi, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def rademacher(self, size=None):
        """Draws from {-1, +1} with equal probability."""
        return 2.0 * self._gen.integers(0, 2, size=size) - 1.0


def rng_uniform(rng: Rng, lo: float, hi: float) -> float:
    """One uniform draw on [lo, hi); advances the stream."""
    return float(rng.uniform(lo, hi))


def fork_stream(rng: Rng, index: int) -> Rng:
    """Independent substream; the parent's state is not advanced."""
    return Rng(rng.seed, rng.stream + (int(index),))
