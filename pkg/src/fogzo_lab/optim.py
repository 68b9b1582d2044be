"""Optimizers (SGD with momentum, AdamW) and the cosine LR schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeMismatchError


@dataclass
class OptimizerState:
    kind: str  # "sgd" | "adamw"
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    moments: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sgd", "adamw"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")


def sgd(momentum: float = 0.0) -> OptimizerState:
    return OptimizerState(kind="sgd", momentum=momentum)


def adamw(beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
          weight_decay: float = 0.0) -> OptimizerState:
    return OptimizerState(kind="adamw", beta1=beta1, beta2=beta2, eps=eps,
                          weight_decay=weight_decay)


def optimizer_step(state: OptimizerState, params: np.ndarray,
                   grads: np.ndarray, lr: float) -> None:
    """Apply one update in place."""
    if params.shape != grads.shape:
        raise ShapeMismatchError(f"params {params.shape} vs grads {grads.shape}")
    if not lr > 0:
        raise ValueError(f"lr must be positive, got {lr}")
    if not np.all(np.isfinite(grads)):
        raise FloatingPointError("non-finite gradients passed to optimizer_step")

    state.step += 1
    if state.kind == "sgd":
        if state.momentum != 0.0:
            buf = state.moments.setdefault("velocity", np.zeros_like(params))
            buf *= state.momentum
            buf += grads
            update = buf
        else:
            update = grads
        params -= lr * update
        return

    # AdamW: decoupled weight decay on the latent parameters
    m = state.moments.setdefault("m", np.zeros_like(params))
    v = state.moments.setdefault("v", np.zeros_like(params))
    m *= state.beta1
    m += (1.0 - state.beta1) * grads
    v *= state.beta2
    v += (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** state.step)
    v_hat = v / (1.0 - state.beta2 ** state.step)
    if state.weight_decay != 0.0:
        params -= lr * state.weight_decay * params
    params -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


def cosine_lr(t: int, total_steps: int, lr_max: float) -> float:
    """Cosine annealing: lr_max * (1 + cos(pi * t / T)) / 2."""
    if total_steps < 1:
        raise ValueError(f"total_steps must be >= 1, got {total_steps}")
    if not 0 <= t <= total_steps:
        raise ValueError(f"step t={t} outside [0, {total_steps}]")
    return lr_max * (1.0 + np.cos(np.pi * t / total_steps)) / 2.0
