"""Gradient estimation strategies: STE backprop, n-SPSA, and the
first-order-guided zeroth-order estimator (FOGZO).

n-SPSA averages central finite differences along random unit-variance
directions.  FOGZO mixes each direction with the normalized backprop
gradient ``g`` at trust ratio beta:

    v_i = sqrt(beta) * s_i * g/||g|| + sqrt(1 - beta) * u_i

so its expectation interpolates between the projection of the smoothed
gradient onto g and the full unbiased estimate.

Loss oracles expose a flat parameter vector that estimators perturb in
place (the Algorithm-1 +eps / -2eps / +eps walk) and then restore from a
snapshot, because the float walk alone is not bitwise-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from .smoothing import PerturbationDist, UniformDist
from .tensor import Rng, ShapeMismatchError, fork_stream

MODE_STE = "ste"
MODE_NSPSA = "nspsa"
MODE_FOGZO = "fogzo"


class EstimatorError(RuntimeError):
    """Raised when an oracle evaluation goes non-finite."""

    def __init__(self, message: str, sample_index: int | None = None):
        super().__init__(message)
        self.sample_index = sample_index


@dataclass
class EstimatorConfig:
    mode: str = MODE_STE
    n: int = 1
    beta_min: float = 1.0
    eps: float = 0.1
    dist: PerturbationDist = field(default_factory=UniformDist)
    r_percent: float = 0.0
    use_sign_flip: bool = True
    beta_constant: bool = False  # keep beta == beta_min for every step

    def __post_init__(self):
        if self.mode not in (MODE_STE, MODE_NSPSA, MODE_FOGZO):
            raise ValueError(f"unknown estimator mode {self.mode!r}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 0.0 <= self.beta_min <= 1.0:
            raise ValueError(f"beta_min must be in [0, 1], got {self.beta_min}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not 0.0 <= self.r_percent <= 100.0:
            raise ValueError(f"r_percent must be in [0, 100], got {self.r_percent}")


@runtime_checkable
class LossOracle(Protocol):
    """Evaluates the (quantized) loss at the current flat parameters."""

    theta: np.ndarray

    def evaluate(self, batch) -> float: ...


@dataclass
class QuadraticOracle:
    """L(theta) = 0.5 * theta^T A theta; closed-form test objective."""

    a: np.ndarray
    theta: np.ndarray
    n_evals: int = 0

    def evaluate(self, batch=None) -> float:
        self.n_evals += 1
        return 0.5 * float(self.theta @ self.a @ self.theta)

    def grad(self) -> np.ndarray:
        return self.a @ self.theta


def beta_schedule(t: int, total_steps: int, beta_min: float) -> float:
    """Linear decay from 1 at t=0 toward beta_min at t=T."""
    if total_steps < 1:
        raise ValueError(f"total_steps must be >= 1, got {total_steps}")
    if not 0 <= t < total_steps:
        raise ValueError(f"step t={t} outside [0, {total_steps})")
    return (1.0 - t / total_steps) * (1.0 - beta_min) + beta_min


def fogzo_direction(g: np.ndarray, beta: float, dist: PerturbationDist,
                    use_sign_flip: bool, rng: Rng) -> np.ndarray:
    """One mixed sample direction v = sqrt(beta)*s*ghat + sqrt(1-beta)*u."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    g = np.asarray(g, dtype=np.float64).ravel()
    norm = float(np.linalg.norm(g))
    # draw order is fixed (s then u) so substreams replay identically
    s = float(rng.rademacher()) if use_sign_flip else 1.0
    u = np.asarray(dist.sample(rng, size=g.size), dtype=np.float64)
    if norm == 0.0:
        return u  # no usable bias direction: fall back to pure unbiased
    ghat = g / norm
    return np.sqrt(beta) * s * ghat + np.sqrt(1.0 - beta) * u


def _central_difference(oracle: LossOracle, theta: np.ndarray, batch,
                        eps: float, v: np.ndarray, index: int) -> float:
    theta += eps * v
    loss_pos = oracle.evaluate(batch)
    theta -= 2.0 * eps * v
    loss_neg = oracle.evaluate(batch)
    theta += eps * v
    if not (np.isfinite(loss_pos) and np.isfinite(loss_neg)):
        raise EstimatorError(
            f"non-finite loss at sample {index}: +eps -> {loss_pos}, -eps -> {loss_neg}",
            sample_index=index,
        )
    return (loss_pos - loss_neg) / (2.0 * eps)


def nspsa_grad(oracle: LossOracle, theta: np.ndarray, batch,
               cfg: EstimatorConfig, rng: Rng) -> np.ndarray:
    """Unbiased zeroth-order estimate averaging cfg.n central differences.

    Exactly 2n oracle evaluations; theta is bitwise-restored on return.
    """
    if cfg.mode != MODE_NSPSA:
        raise ValueError(f"nspsa_grad requires mode 'nspsa', got {cfg.mode!r}")
    snapshot = theta.copy()
    acc = np.zeros_like(theta)
    try:
        for i in range(cfg.n):
            sub = fork_stream(rng, i)
            u = np.asarray(cfg.dist.sample(sub, size=theta.size), dtype=np.float64)
            fd = _central_difference(oracle, theta, batch, cfg.eps, u, i)
            acc += fd * u
    finally:
        theta[:] = snapshot
    return acc / cfg.n


def fogzo_warmup_steps(r_percent: float, total_steps: int) -> int:
    """Number of leading steps that run in pure STE mode.

    Zeroth-order sampling starts once t exceeds r/100 * T; r = 0 means no
    warmup at all and r = 100 keeps every step in STE mode.
    """
    if r_percent == 0.0:
        return 0
    return min(total_steps, int(np.floor(r_percent / 100.0 * total_steps)) + 1)


def fogzo_grad(oracle: LossOracle, theta: np.ndarray, g: np.ndarray, batch,
               cfg: EstimatorConfig, t: int, total_steps: int, rng: Rng) -> np.ndarray:
    """FOGZO estimate; returns g unchanged during the hybrid STE warmup.

    Past warmup: exactly 2n oracle evaluations, theta bitwise-restored.
    """
    if cfg.mode != MODE_FOGZO:
        raise ValueError(f"fogzo_grad requires mode 'fogzo', got {cfg.mode!r}")
    g = np.asarray(g, dtype=np.float64).ravel()
    if g.shape != theta.shape:
        raise ShapeMismatchError(f"g shape {g.shape} vs theta shape {theta.shape}")
    if t < fogzo_warmup_steps(cfg.r_percent, total_steps):
        return g  # STE mode: zero extra oracle calls
    beta = cfg.beta_min if cfg.beta_constant else beta_schedule(t, total_steps, cfg.beta_min)
    snapshot = theta.copy()
    acc = np.zeros_like(theta)
    try:
        for i in range(cfg.n):
            sub = fork_stream(rng, i)
            v = fogzo_direction(g, beta, cfg.dist, cfg.use_sign_flip, sub)
            fd = _central_difference(oracle, theta, batch, cfg.eps, v, i)
            acc += fd * v
    finally:
        theta[:] = snapshot
    return acc / cfg.n


def expected_fogzo_oracle(a: np.ndarray, theta: np.ndarray, g: np.ndarray,
                          beta: float) -> np.ndarray:
    """Closed-form E[G] on the quadratic objective:
    (beta * ghat ghat^T + (1 - beta) * I) A theta."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or not np.array_equal(a, a.T):
        raise ValueError("expected_fogzo_oracle requires a symmetric matrix")
    theta = np.asarray(theta, dtype=np.float64).ravel()
    g = np.asarray(g, dtype=np.float64).ravel()
    grad = a @ theta
    norm = float(np.linalg.norm(g))
    if norm == 0.0:
        return grad  # estimator falls back to the pure unbiased direction
    ghat = g / norm
    return beta * ghat * (ghat @ grad) + (1.0 - beta) * grad
