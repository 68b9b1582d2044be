"""Weight quantizers and quantization-scale initialization.

Multi-bit quantization maps a latent weight theta to
``alpha * round(clip(theta / alpha, q_n, q_p))`` where the integer clip
bounds for p bits are ``q_n = -2**(p-1)`` and ``q_p = 2**(p-1) - 1``.
Binary quantization maps to ``alpha * sign(theta)`` with sign(0) := +1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import as_matrix


class QuantizerError(ValueError):
    pass


@dataclass(frozen=True)
class Quantizer:
    bits: int
    alpha: float

    def __post_init__(self):
        if self.bits < 1:
            raise QuantizerError(f"bits must be >= 1, got {self.bits}")
        if not self.alpha > 0:
            raise QuantizerError(f"alpha must be positive, got {self.alpha}")

    @property
    def q_n(self) -> int:
        return -(2 ** (self.bits - 1))

    @property
    def q_p(self) -> int:
        return 2 ** (self.bits - 1) - 1

    def quantize(self, theta: np.ndarray) -> np.ndarray:
        if self.bits == 1:
            return quantize_binary(self, theta)
        return quantize_multibit(self, theta)


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round halves away from zero (numpy's default rounds to even)."""
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def quantize_multibit(q: Quantizer, theta: np.ndarray) -> np.ndarray:
    if q.bits < 2:
        raise QuantizerError("quantize_multibit requires bits >= 2; use quantize_binary for 1-bit")
    theta = as_matrix(theta)
    scaled = np.clip(theta / q.alpha, q.q_n, q.q_p)
    return q.alpha * round_half_away(scaled)


def quantize_binary(q: Quantizer, theta: np.ndarray) -> np.ndarray:
    if q.bits != 1:
        raise QuantizerError("quantize_binary requires bits == 1")
    theta = as_matrix(theta)
    # sign(0) = +1 so every weight lands on the two-point grid
    return np.where(theta >= 0, q.alpha, -q.alpha)


def _weighted_absmean(per_layer: list[float], sizes: list[int]) -> float:
    total = sum(sizes)
    return float(sum(a * n for a, n in zip(per_layer, sizes)) / total)


def init_scale_lsq(layers: list[np.ndarray], bits: int) -> float:
    """LSQ-style scale init: per layer 2*absmean/sqrt(q_p), then a
    parameter-count weighted average across layers."""
    if bits < 2:
        raise QuantizerError("init_scale_lsq requires bits >= 2")
    if not layers:
        raise QuantizerError("init_scale_lsq requires at least one layer")
    q_p = 2 ** (bits - 1) - 1
    sizes = []
    scales = []
    for i, layer in enumerate(layers):
        layer = as_matrix(layer)
        if layer.size == 0:
            raise QuantizerError(f"layer {i} is empty")
        sizes.append(layer.size)
        scales.append(2.0 * float(np.mean(np.abs(layer))) / np.sqrt(q_p))
    alpha = _weighted_absmean(scales, sizes)
    if alpha == 0.0:
        raise QuantizerError("all weights are zero; scale would be 0")
    return alpha


def init_scale_absmean(layers: list[np.ndarray]) -> float:
    """1-bit scale init: weighted average of per-layer mean |theta|."""
    if not layers:
        raise QuantizerError("init_scale_absmean requires at least one layer")
    sizes = []
    scales = []
    for i, layer in enumerate(layers):
        layer = as_matrix(layer)
        if layer.size == 0:
            raise QuantizerError(f"layer {i} is empty")
        sizes.append(layer.size)
        scales.append(float(np.mean(np.abs(layer))))
    alpha = _weighted_absmean(scales, sizes)
    if alpha == 0.0:
        raise QuantizerError("all weights are zero; scale would be 0")
    return alpha
