"""Smooth surrogates used by the straight-through estimator.

Each surrogate stands in for a non-differentiable operator during
backprop: identity and CGM replace rounding, hardtanh / tanh / ApproxSign
replace sign.  Only the derivative matters for training; the value
functions are kept for plotting and for the smoothing-kernel checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quant import Quantizer, round_half_away
from .tensor import ShapeMismatchError, as_matrix

IDENTITY = "identity"
HARDTANH = "hardtanh"
TANH = "tanh"
APPROX_SIGN = "approxsign"
CGM = "cgm"

_ROUND_TARGETS = {IDENTITY, CGM}
_SIGN_TARGETS = {HARDTANH, TANH, APPROX_SIGN}


@dataclass(frozen=True)
class SurrogateKind:
    variant: str
    threshold: float | None = None  # CGM confidence threshold T

    def __post_init__(self):
        if self.variant not in _ROUND_TARGETS | _SIGN_TARGETS:
            raise ValueError(f"unknown surrogate variant {self.variant!r}")
        if self.variant == CGM:
            if self.threshold is None or not 0.0 < self.threshold <= 0.5:
                raise ValueError(f"CGM threshold must be in (0, 0.5], got {self.threshold}")
        elif self.threshold is not None:
            raise ValueError(f"threshold only applies to CGM, got variant {self.variant!r}")

    @property
    def target(self) -> str:
        """The operator this surrogate approximates: 'round' or 'sign'."""
        return "round" if self.variant in _ROUND_TARGETS else "sign"


def identity_kind() -> SurrogateKind:
    return SurrogateKind(IDENTITY)


def hardtanh_kind() -> SurrogateKind:
    return SurrogateKind(HARDTANH)


def tanh_kind() -> SurrogateKind:
    return SurrogateKind(TANH)


def approx_sign_kind() -> SurrogateKind:
    return SurrogateKind(APPROX_SIGN)


def cgm_kind(threshold: float) -> SurrogateKind:
    return SurrogateKind(CGM, threshold)


def _approx_sign_value(x):
    return np.piecewise(
        np.asarray(x, dtype=np.float64),
        [x < -1.0, (x >= -1.0) & (x < 0.0), (x >= 0.0) & (x < 1.0)],
        [-1.0, lambda t: 2.0 * t + t * t, lambda t: 2.0 * t - t * t, 1.0],
    )


def _cgm_value(x, t_thresh):
    # Piecewise-linear interpolation between adjacent rounding levels.
    # Flat at round(x) while |x - round(x)| < 0.5 - T, linear with slope
    # 1/(2T) across the width-2T band around each half-integer boundary.
    x = np.asarray(x, dtype=np.float64)
    lo = np.floor(x)
    boundary = lo + 0.5
    below = x + t_thresh < boundary
    above = x - t_thresh > boundary
    ramp = lo + (x - boundary + t_thresh) / (2.0 * t_thresh)
    return np.where(below, lo, np.where(above, lo + 1.0, ramp))


def _cgm_deriv(x, t_thresh):
    near_boundary = np.abs(x - round_half_away(np.asarray(x, dtype=np.float64))) >= 0.5 - t_thresh
    return np.where(near_boundary, 1.0 / (2.0 * t_thresh), 0.0)


def surrogate_value(kind: SurrogateKind, x):
    """Surrogate function value, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    if kind.variant == IDENTITY:
        return x.copy()
    if kind.variant == HARDTANH:
        return np.clip(x, -1.0, 1.0)
    if kind.variant == TANH:
        return np.tanh(x)
    if kind.variant == APPROX_SIGN:
        return _approx_sign_value(x)
    return _cgm_value(x, kind.threshold)


def surrogate_deriv(kind: SurrogateKind, x):
    """Surrogate derivative, elementwise (the STE's stand-in Jacobian)."""
    x = np.asarray(x, dtype=np.float64)
    if kind.variant == IDENTITY:
        return np.ones_like(x)
    if kind.variant == HARDTANH:
        return np.where((x >= -1.0) & (x <= 1.0), 1.0, 0.0)
    if kind.variant == TANH:
        t = np.tanh(x)
        return 1.0 - t * t
    if kind.variant == APPROX_SIGN:
        return np.where(
            (x >= -1.0) & (x < 0.0),
            2.0 + 2.0 * x,
            np.where((x >= 0.0) & (x < 1.0), 2.0 - 2.0 * x, 0.0),
        )
    return _cgm_deriv(x, kind.threshold)


def ste_backward(q: Quantizer, kind: SurrogateKind, theta: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Backward pass through the quantizer using the surrogate Jacobian.

    Multi-bit: upstream * 1[q_n <= theta/alpha <= q_p] * deriv(theta/alpha);
    the alpha from dequantization and 1/alpha from its inverse cancel.
    Binary: upstream * deriv(theta/alpha), no clip mask.
    """
    theta = as_matrix(theta)
    upstream = as_matrix(upstream)
    if theta.shape != upstream.shape:
        raise ShapeMismatchError(
            f"ste_backward shape mismatch: theta {theta.shape} vs upstream {upstream.shape}"
        )
    scaled = theta / q.alpha
    d = surrogate_deriv(kind, scaled)
    if q.bits == 1:
        return upstream * d
    inside = (scaled >= q.q_n) & (scaled <= q.q_p)
    return upstream * np.where(inside, d, 0.0)
