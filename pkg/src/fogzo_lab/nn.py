"""Feed-forward network with hand-derived backprop and quantized linears.

Parameters live in one contiguous float64 vector; per-layer weight and
bias matrices are views into it, so zeroth-order estimators can perturb
the whole model through a single flat array.  FLOPs bookkeeping follows
the 2*b*o*c forward / 4*b*o*c backward convention for a linear layer with
batch b, input width c, output width o (bias adds and activations are not
counted).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quant import Quantizer
from .surrogate import SurrogateKind, identity_kind, ste_backward
from .tensor import Rng, ShapeMismatchError, check_finite, fork_stream


class StaleCacheError(RuntimeError):
    """Backward called with a cache from different parameter values."""


@dataclass
class FlopsCounter:
    forward_flops: int = 0
    backward_flops: int = 0

    def reset(self):
        self.forward_flops = 0
        self.backward_flops = 0


def flops_report(counter: FlopsCounter) -> tuple[int, int]:
    return counter.forward_flops, counter.backward_flops


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class MlpModel:
    """ReLU MLP with softmax cross-entropy loss.

    Weights are quantized in the forward pass when a quantizer is set;
    biases stay full-precision.  Weight init is Kaiming-style uniform
    (bound sqrt(6 / fan_in)), biases zero.
    """

    def __init__(self, layer_sizes: list[int], rng: Rng,
                 quantizer: Quantizer | None = None,
                 surrogate: SurrogateKind | None = None):
        if len(layer_sizes) < 2:
            raise ValueError("need at least an input and an output dimension")
        self.layer_sizes = list(layer_sizes)
        self.quantizer = quantizer
        self.surrogate = surrogate if surrogate is not None else identity_kind()
        self.flops = FlopsCounter()

        dims = list(zip(layer_sizes[:-1], layer_sizes[1:]))
        total = sum(fan_in * fan_out + fan_out for fan_in, fan_out in dims)
        self.theta = np.zeros(total, dtype=np.float64)

        self._weights: list[np.ndarray] = []
        self._biases: list[np.ndarray] = []
        offset = 0
        for i, (fan_in, fan_out) in enumerate(dims):
            w = self.theta[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
            offset += fan_in * fan_out
            b = self.theta[offset:offset + fan_out]
            offset += fan_out
            bound = np.sqrt(6.0 / fan_in)
            w[:] = fork_stream(rng, i).uniform(-bound, bound, size=w.shape)
            self._weights.append(w)
            self._biases.append(b)

    # -- parameter access ------------------------------------------------

    @property
    def num_params(self) -> int:
        return self.theta.size

    def weight_matrices(self) -> list[np.ndarray]:
        """Latent (unquantized) per-layer weight views."""
        return list(self._weights)

    def effective_weights(self) -> list[np.ndarray]:
        """Weights as used by the forward pass (quantized if configured)."""
        if self.quantizer is None:
            return [w.copy() for w in self._weights]
        return [self.quantizer.quantize(w) for w in self._weights]

    def perturb_params(self, direction: np.ndarray, scale: float) -> None:
        direction = np.asarray(direction, dtype=np.float64).ravel()
        if direction.size != self.theta.size:
            raise ShapeMismatchError(
                f"direction length {direction.size} != parameter count {self.theta.size}"
            )
        self.theta += scale * direction

    # -- forward / backward ----------------------------------------------

    def forward(self, inputs: np.ndarray, labels: np.ndarray):
        inputs = np.asarray(inputs, dtype=np.float64)
        labels = np.asarray(labels)
        if inputs.ndim != 2 or inputs.shape[1] != self.layer_sizes[0]:
            raise ShapeMismatchError(
                f"inputs shape {inputs.shape} incompatible with input dim {self.layer_sizes[0]}"
            )
        if labels.shape[0] != inputs.shape[0]:
            raise ShapeMismatchError("label count != input count")

        batch = inputs.shape[0]
        activation = inputs
        layer_inputs = []
        pre_acts = []
        eff_weights = []
        n_layers = len(self._weights)
        for i, (w, b) in enumerate(zip(self._weights, self._biases)):
            w_eff = self.quantizer.quantize(w) if self.quantizer is not None else w
            z = activation @ w_eff + b
            self.flops.forward_flops += 2 * batch * w.shape[0] * w.shape[1]
            layer_inputs.append(activation)
            pre_acts.append(z)
            eff_weights.append(w_eff)
            activation = np.maximum(z, 0.0) if i < n_layers - 1 else z

        probs = _softmax_rows(activation)
        picked = probs[np.arange(batch), labels]
        loss = float(-np.mean(np.log(np.maximum(picked, 1e-300))))
        check_finite(np.asarray(loss), "forward loss")
        cache = {
            "layer_inputs": layer_inputs,
            "pre_acts": pre_acts,
            "eff_weights": eff_weights,
            "probs": probs,
            "labels": labels,
            "batch": batch,
            "theta_snapshot": self.theta.copy(),
        }
        return loss, cache

    def backward(self, cache) -> np.ndarray:
        if not np.array_equal(self.theta, cache["theta_snapshot"]):
            raise StaleCacheError("parameters changed since the cached forward pass")
        batch = cache["batch"]
        probs = cache["probs"]
        labels = cache["labels"]

        dz = probs.copy()
        dz[np.arange(batch), labels] -= 1.0
        dz /= batch

        grad = np.zeros_like(self.theta)
        offset = self.theta.size
        for i in reversed(range(len(self._weights))):
            w = self._weights[i]
            w_eff = cache["eff_weights"][i]
            a_in = cache["layer_inputs"][i]

            db = dz.sum(axis=0)
            dw_upstream = a_in.T @ dz
            self.flops.backward_flops += 4 * batch * w.shape[0] * w.shape[1]
            if self.quantizer is not None:
                dw = ste_backward(self.quantizer, self.surrogate, w, dw_upstream)
            else:
                dw = dw_upstream

            offset -= w.shape[1]
            grad[offset:offset + w.shape[1]] = db
            offset -= w.size
            grad[offset:offset + w.size] = dw.ravel()

            if i > 0:
                da = dz @ w_eff.T
                dz = da * (cache["pre_acts"][i - 1] > 0.0)
        check_finite(grad, "backward gradient")
        return grad

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        """Class predictions; counts forward FLOPs like any forward pass."""
        inputs = np.asarray(inputs, dtype=np.float64)
        activation = inputs
        n_layers = len(self._weights)
        for i, (w, b) in enumerate(zip(self._weights, self._biases)):
            w_eff = self.quantizer.quantize(w) if self.quantizer is not None else w
            z = activation @ w_eff + b
            self.flops.forward_flops += 2 * inputs.shape[0] * w.shape[0] * w.shape[1]
            activation = np.maximum(z, 0.0) if i < n_layers - 1 else z
        return np.argmax(activation, axis=1)


@dataclass
class ModelOracle:
    """LossOracle adapter: evaluates the model's loss on a fixed batch
    shape (batch is passed per call as an (inputs, labels) tuple)."""

    model: MlpModel

    @property
    def theta(self) -> np.ndarray:
        return self.model.theta

    def evaluate(self, batch) -> float:
        inputs, labels = batch
        loss, _ = self.model.forward(inputs, labels)
        return loss


def forward_flops_per_step(layer_sizes: list[int], batch: int) -> int:
    """Closed-form forward FLOPs of one full-batch pass."""
    return sum(2 * batch * c * o for c, o in zip(layer_sizes[:-1], layer_sizes[1:]))


def backward_flops_per_step(layer_sizes: list[int], batch: int) -> int:
    return 2 * forward_flops_per_step(layer_sizes, batch)
