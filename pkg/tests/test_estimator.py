import numpy as np
import pytest

from conftest import quadratic_problem
from fogzo_lab.estimator import (
    EstimatorConfig,
    EstimatorError,
    QuadraticOracle,
    beta_schedule,
    expected_fogzo_oracle,
    fogzo_direction,
    fogzo_grad,
    fogzo_warmup_steps,
    nspsa_grad,
)
from fogzo_lab.smoothing import UniformDist
from fogzo_lab.tensor import Rng, ShapeMismatchError, fork_stream


def test_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(mode="sgd")
    with pytest.raises(ValueError):
        EstimatorConfig(n=0)
    with pytest.raises(ValueError):
        EstimatorConfig(beta_min=1.5)
    with pytest.raises(ValueError):
        EstimatorConfig(eps=0.0)
    with pytest.raises(ValueError):
        EstimatorConfig(r_percent=101.0)


def test_beta_schedule_endpoints():
    assert beta_schedule(0, 100, 0.2) == 1.0
    # linear: halfway between 1 and beta_min at t = T/2
    assert beta_schedule(50, 100, 0.2) == pytest.approx(0.6)
    assert beta_schedule(99, 100, 0.2) == pytest.approx(0.2 + 0.01 * 0.8)
    with pytest.raises(ValueError):
        beta_schedule(100, 100, 0.2)
    with pytest.raises(ValueError):
        beta_schedule(-1, 100, 0.2)
    with pytest.raises(ValueError):
        beta_schedule(0, 0, 0.2)


def test_direction_beta_one_is_signed_unit_gradient():
    g = np.array([3.0, 4.0])
    for i in range(20):
        v = fogzo_direction(g, 1.0, UniformDist(), True, Rng(1, (i,)))
        assert np.allclose(np.abs(v), np.abs(g) / 5.0)
        assert np.linalg.norm(v) == pytest.approx(1.0)


def test_direction_beta_zero_ignores_gradient():
    rng_a = Rng(2)
    rng_b = Rng(2)
    v1 = fogzo_direction(np.array([1.0, 0.0]), 0.0, UniformDist(), True, rng_a)
    v2 = fogzo_direction(np.array([0.0, 9.0]), 0.0, UniformDist(), True, rng_b)
    assert np.array_equal(v1, v2)


def test_direction_zero_gradient_falls_back_to_noise():
    v = fogzo_direction(np.zeros(4), 0.9, UniformDist(), True, Rng(3))
    assert np.all(np.abs(v) < np.sqrt(3))
    assert np.linalg.norm(v) > 0


def test_direction_mixes_with_expected_norm():
    # E||v||^2 = beta + (1-beta)*d for unit-variance coordinates
    g = Rng(4).standard_normal(16)
    beta, d, n = 0.7, 16, 20_000
    root = Rng(5)
    sq = np.array([
        np.sum(fogzo_direction(g, beta, UniformDist(), True, fork_stream(root, i)) ** 2)
        for i in range(n)
    ])
    expected = beta + (1 - beta) * d
    assert abs(sq.mean() - expected) <= 5 * sq.std(ddof=1) / np.sqrt(n)


def test_direction_beta_validation():
    with pytest.raises(ValueError):
        fogzo_direction(np.ones(2), 1.1, UniformDist(), True, Rng(0))


def test_nspsa_constant_objective_gives_zero():
    a = np.zeros((5, 5))
    theta = Rng(6).standard_normal(5)
    cfg = EstimatorConfig(mode="nspsa", n=4, eps=0.1)
    grad = nspsa_grad(QuadraticOracle(a, theta), theta, None, cfg, Rng(7))
    assert np.array_equal(grad, np.zeros(5))


def test_nspsa_eval_count_and_restoration():
    a, theta, _ = quadratic_problem(5, 8)
    oracle = QuadraticOracle(a, theta)
    before = theta.copy()
    cfg = EstimatorConfig(mode="nspsa", n=7, eps=0.05)
    nspsa_grad(oracle, theta, None, cfg, Rng(9))
    assert oracle.n_evals == 14  # exactly 2n
    assert np.array_equal(theta, before)  # bitwise


def test_nspsa_matches_manual_per_sample_computation():
    # reduction order must not matter: rebuild each sample independently
    a, theta, _ = quadratic_problem(6, 10)
    cfg = EstimatorConfig(mode="nspsa", n=5, eps=0.1)
    rng = Rng(11)
    got = nspsa_grad(QuadraticOracle(a, theta), theta, None, cfg, rng)

    def loss(th):
        return 0.5 * float(th @ a @ th)

    contributions = []
    for i in reversed(range(cfg.n)):  # deliberately out of order
        u = np.asarray(cfg.dist.sample(fork_stream(rng, i), size=theta.size))
        fd = (loss(theta + cfg.eps * u) - loss(theta - cfg.eps * u)) / (2 * cfg.eps)
        contributions.append((i, fd * u))
    manual = sum(c for _, c in sorted(contributions)) / cfg.n
    assert np.allclose(got, manual, rtol=0, atol=1e-12)


def test_nspsa_mean_approaches_true_gradient():
    a, theta, grad_true = quadratic_problem(6, 12)
    cfg = EstimatorConfig(mode="nspsa", n=20_000, eps=0.1)
    est = nspsa_grad(QuadraticOracle(a, theta), theta, None, cfg, Rng(13))
    # crude bound: estimator variance per coordinate is O(d) at n samples
    assert np.max(np.abs(est - grad_true)) < 0.2


def test_nspsa_rejects_wrong_mode():
    a, theta, _ = quadratic_problem(3, 14)
    with pytest.raises(ValueError):
        nspsa_grad(QuadraticOracle(a, theta), theta, None,
                   EstimatorConfig(mode="fogzo"), Rng(0))


def test_warmup_steps():
    assert fogzo_warmup_steps(0.0, 1000) == 0
    assert fogzo_warmup_steps(100.0, 1000) == 1000
    assert fogzo_warmup_steps(50.0, 1000) == 501
    assert fogzo_warmup_steps(100.0, 7) == 7


def test_fogzo_warmup_returns_g_without_evals():
    a, theta, grad_true = quadratic_problem(4, 15)
    oracle = QuadraticOracle(a, theta)
    cfg = EstimatorConfig(mode="fogzo", n=3, eps=0.1, r_percent=100.0)
    out = fogzo_grad(oracle, theta, grad_true, None, cfg, t=5, total_steps=10, rng=Rng(16))
    assert np.array_equal(out, grad_true)
    assert oracle.n_evals == 0


def test_fogzo_eval_count_and_restoration():
    a, theta, grad_true = quadratic_problem(4, 17)
    oracle = QuadraticOracle(a, theta)
    before = theta.copy()
    cfg = EstimatorConfig(mode="fogzo", n=6, beta_min=0.5, eps=0.1, beta_constant=True)
    fogzo_grad(oracle, theta, grad_true, None, cfg, t=0, total_steps=10, rng=Rng(18))
    assert oracle.n_evals == 12
    assert np.array_equal(theta, before)


def test_fogzo_shape_mismatch():
    a, theta, _ = quadratic_problem(4, 19)
    cfg = EstimatorConfig(mode="fogzo")
    with pytest.raises(ShapeMismatchError):
        fogzo_grad(QuadraticOracle(a, theta), theta, np.ones(3), None, cfg, 0, 1, Rng(0))


def test_fogzo_beta_one_no_sign_flip_recovers_directional_derivative():
    # v = ghat exactly, so G = (ghat . A theta) ghat up to FD roundoff
    a, theta, grad_true = quadratic_problem(5, 20)
    ghat = grad_true / np.linalg.norm(grad_true)
    cfg = EstimatorConfig(mode="fogzo", n=1, beta_min=1.0, eps=0.1,
                          use_sign_flip=False, beta_constant=True)
    out = fogzo_grad(QuadraticOracle(a, theta), theta, grad_true, None, cfg, 0, 1, Rng(21))
    expected = (ghat @ grad_true) * ghat
    assert np.allclose(out, expected, atol=1e-10)


def test_non_finite_loss_raises_with_sample_index():
    class BadOracle:
        def __init__(self, theta):
            self.theta = theta

        def evaluate(self, batch=None):
            return float("nan")

    theta = np.ones(3)
    cfg = EstimatorConfig(mode="nspsa", n=2, eps=0.1)
    with pytest.raises(EstimatorError) as exc:
        nspsa_grad(BadOracle(theta), theta, None, cfg, Rng(22))
    assert exc.value.sample_index == 0
    assert np.array_equal(theta, np.ones(3))  # restored despite the raise


def test_expected_oracle_closed_form():
    a, theta, grad_true = quadratic_problem(5, 23)
    # beta=0: plain gradient regardless of g
    assert np.allclose(expected_fogzo_oracle(a, theta, np.ones(5), 0.0), grad_true)
    # beta=1, g parallel: unchanged
    assert np.allclose(expected_fogzo_oracle(a, theta, 2.0 * grad_true, 1.0), grad_true)
    # beta=1, g orthogonal: fully suppressed
    x = Rng(24).standard_normal(5)
    g_orth = x - (x @ grad_true) / (grad_true @ grad_true) * grad_true
    assert np.allclose(expected_fogzo_oracle(a, theta, g_orth, 1.0), np.zeros(5), atol=1e-12)
    # zero g falls back to the unbiased estimate
    assert np.allclose(expected_fogzo_oracle(a, theta, np.zeros(5), 0.9), grad_true)


def test_expected_oracle_requires_symmetric_matrix():
    with pytest.raises(ValueError):
        expected_fogzo_oracle(np.array([[0.0, 1.0], [0.0, 0.0]]), np.ones(2), np.ones(2), 0.5)


def test_quadratic_oracle_grad():
    a, theta, grad_true = quadratic_problem(4, 25)
    oracle = QuadraticOracle(a, theta)
    assert np.array_equal(oracle.grad(), grad_true)
    assert oracle.evaluate() == pytest.approx(0.5 * theta @ a @ theta)
