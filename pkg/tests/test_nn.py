import numpy as np
import pytest

from fogzo_lab.data import synthetic_two_gaussians
from fogzo_lab.nn import (
    MlpModel,
    ModelOracle,
    StaleCacheError,
    backward_flops_per_step,
    flops_report,
    forward_flops_per_step,
)
from fogzo_lab.quant import Quantizer
from fogzo_lab.surrogate import identity_kind, tanh_kind
from fogzo_lab.tensor import Rng, ShapeMismatchError


def small_problem(seed=0, n=16, d=12, classes=5, hidden=8):
    rng = Rng(seed)
    model = MlpModel([d, hidden, classes], rng)
    ds = synthetic_two_gaussians(n, d, 3.0, Rng(seed + 1))
    return model, ds.images, ds.labels % classes


def test_param_count():
    model = MlpModel([784, 10, 10], Rng(0))
    assert model.num_params == 784 * 10 + 10 + 10 * 10 + 10  # 7960


def test_init_ranges_and_zero_biases():
    model = MlpModel([784, 10, 10], Rng(1))
    w1, w2 = model.weight_matrices()
    assert np.max(np.abs(w1)) < np.sqrt(6.0 / 784)
    assert np.max(np.abs(w2)) < np.sqrt(6.0 / 10)
    # biases are the tail of each layer block and start at zero
    assert model.theta[784 * 10:784 * 10 + 10].tolist() == [0.0] * 10
    assert model.theta[-10:].tolist() == [0.0] * 10


def test_zero_params_give_uniform_loss():
    model, x, y = small_problem(classes=5)
    model.theta[:] = 0.0
    loss, _ = model.forward(x, y)
    assert loss == pytest.approx(np.log(5.0), abs=1e-12)


def test_forward_input_validation():
    model, x, y = small_problem()
    with pytest.raises(ShapeMismatchError):
        model.forward(x[:, :5], y)
    with pytest.raises(ShapeMismatchError):
        model.forward(x, y[:-1])
    with pytest.raises(ValueError):
        MlpModel([10], Rng(0))


def test_gradient_matches_finite_differences():
    model, x, y = small_problem()
    loss, cache = model.forward(x, y)
    grad = model.backward(cache)
    h = 1e-5
    worst = 0.0
    for i in range(model.num_params):
        orig = model.theta[i]
        model.theta[i] = orig + h
        lp, _ = model.forward(x, y)
        model.theta[i] = orig - h
        lm, _ = model.forward(x, y)
        model.theta[i] = orig
        fd = (lp - lm) / (2 * h)
        worst = max(worst, abs(grad[i] - fd) / max(abs(fd), 1e-8))
    assert worst < 1e-4


def test_quantized_gradient_matches_fd_with_smooth_surrogate():
    # with the tanh surrogate the quantized forward is replaced by a smooth
    # proxy in backward only; check backprop against FD of the proxy loss
    model, x, y = small_problem(seed=5)
    model.quantizer = Quantizer(2, 0.4)
    model.surrogate = identity_kind()
    loss, cache = model.forward(x, y)
    grad = model.backward(cache)
    assert np.all(np.isfinite(grad))
    # bias gradients are unaffected by quantization: FD must match exactly
    h = 1e-6
    bias_idx = model.num_params - 1
    orig = model.theta[bias_idx]
    model.theta[bias_idx] = orig + h
    lp, _ = model.forward(x, y)
    model.theta[bias_idx] = orig - h
    lm, _ = model.forward(x, y)
    model.theta[bias_idx] = orig
    assert grad[bias_idx] == pytest.approx((lp - lm) / (2 * h), abs=1e-6)


def test_effective_weights_on_quantizer_grid():
    model, _, _ = small_problem(seed=2)
    model.quantizer = Quantizer(2, 0.3)
    for w_eff in model.effective_weights():
        grid = 0.3 * np.arange(-2, 2, dtype=np.float64)
        assert np.all(np.isin(w_eff, grid))


def test_unquantized_effective_weights_are_copies():
    model, _, _ = small_problem(seed=3)
    eff = model.effective_weights()
    eff[0][0, 0] = 999.0
    assert model.weight_matrices()[0][0, 0] != 999.0


def test_stale_cache_detection():
    model, x, y = small_problem()
    _, cache = model.forward(x, y)
    model.theta[0] += 1e-9
    with pytest.raises(StaleCacheError):
        model.backward(cache)


def test_perturb_params():
    model, _, _ = small_problem()
    before = model.theta.copy()
    d = np.ones(model.num_params)
    model.perturb_params(d, 0.5)
    assert np.array_equal(model.theta, before + 0.5)
    with pytest.raises(ShapeMismatchError):
        model.perturb_params(np.ones(3), 1.0)


def test_flops_closed_forms():
    sizes = [784, 10, 10]
    assert forward_flops_per_step(sizes, 32) == 2 * 32 * (784 * 10 + 10 * 10)
    assert backward_flops_per_step(sizes, 32) == 2 * forward_flops_per_step(sizes, 32)


def test_flops_counter_matches_closed_form():
    model, x, y = small_problem(n=16, d=12, hidden=8, classes=5)
    model.flops.reset()
    _, cache = model.forward(x, y)
    assert model.flops.forward_flops == forward_flops_per_step([12, 8, 5], 16)
    model.backward(cache)
    assert model.flops.backward_flops == backward_flops_per_step([12, 8, 5], 16)
    fwd, bwd = flops_report(model.flops)
    assert (fwd, bwd) == (model.flops.forward_flops, model.flops.backward_flops)


def test_predict_counts_forward_flops():
    model, x, y = small_problem()
    model.flops.reset()
    preds = model.predict(x)
    assert preds.shape == (x.shape[0],)
    assert model.flops.forward_flops == forward_flops_per_step([12, 8, 5], x.shape[0])


def test_model_learns_synthetic_blobs():
    model, x, y = small_problem(seed=7, n=128)
    from fogzo_lab.optim import adamw, optimizer_step
    opt = adamw()
    for _ in range(150):
        loss, cache = model.forward(x, y)
        grad = model.backward(cache)
        optimizer_step(opt, model.theta, grad, 1e-2)
    final, _ = model.forward(x, y)
    assert final < 0.1
    assert np.mean(model.predict(x) == y) > 0.95


def test_model_oracle_adapter():
    model, x, y = small_problem()
    oracle = ModelOracle(model)
    assert oracle.theta is model.theta
    loss, _ = model.forward(x, y)
    assert oracle.evaluate((x, y)) == loss


def test_quantized_training_with_ste_reduces_loss():
    model, x, y = small_problem(seed=9, n=128)
    from fogzo_lab.optim import adamw, optimizer_step
    from fogzo_lab.quant import init_scale_lsq
    model.quantizer = Quantizer(2, init_scale_lsq(model.weight_matrices(), 2))
    model.surrogate = tanh_kind()
    start, _ = model.forward(x, y)
    opt = adamw()
    for _ in range(100):
        loss, cache = model.forward(x, y)
        grad = model.backward(cache)
        optimizer_step(opt, model.theta, grad, 1e-2)
    final, _ = model.forward(x, y)
    assert final < start
