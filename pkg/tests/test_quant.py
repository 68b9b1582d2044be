import numpy as np
import pytest

from fogzo_lab.quant import (
    Quantizer,
    QuantizerError,
    init_scale_absmean,
    init_scale_lsq,
    quantize_binary,
    quantize_multibit,
    round_half_away,
)
from fogzo_lab.tensor import Rng


def test_round_half_away_halves():
    x = np.array([0.5, -0.5, 1.5, 2.5, -2.5, 0.49, -0.49, 0.0])
    expected = np.array([1.0, -1.0, 2.0, 3.0, -3.0, 0.0, -0.0, 0.0])
    assert np.array_equal(round_half_away(x), expected)


def test_clip_bounds_two_bit():
    q = Quantizer(2, 1.0)
    assert q.q_n == -2
    assert q.q_p == 1


def test_clip_bounds_four_bit():
    q = Quantizer(4, 1.0)
    assert q.q_n == -8
    assert q.q_p == 7


def test_quantize_multibit_examples():
    q = Quantizer(2, 0.5)
    theta = np.array([[0.6, -1.3, 0.25, -0.25, 0.0]])
    # scaled: 1.2, -2.6, 0.5, -0.5, 0 -> clipped/rounded: 1, -2, 1, -1, 0
    expected = np.array([[0.5, -1.0, 0.5, -0.5, 0.0]])
    assert np.array_equal(q.quantize(theta), expected)


def test_quantize_binary_sign_of_zero_is_positive():
    q = Quantizer(1, 0.3)
    theta = np.array([[0.0, -0.0, 2.0, -1e-12]])
    expected = np.array([[0.3, 0.3, 0.3, -0.3]])
    assert np.array_equal(q.quantize(theta), expected)


def test_quantized_values_on_grid():
    q = Quantizer(3, 0.7)
    theta = Rng(3).standard_normal((20, 20)) * 5.0
    out = q.quantize(theta)
    grid = q.alpha * np.arange(q.q_n, q.q_p + 1, dtype=np.float64)
    assert np.all(np.isin(out, grid))


def test_quantize_idempotent():
    q = Quantizer(2, 0.5)
    theta = Rng(4).standard_normal((8, 8))
    once = q.quantize(theta)
    assert np.array_equal(q.quantize(once), once)


def test_dispatch_errors():
    with pytest.raises(QuantizerError):
        quantize_binary(Quantizer(2, 1.0), np.zeros((2, 2)))
    with pytest.raises(QuantizerError):
        Quantizer(0, 1.0)
    with pytest.raises(QuantizerError):
        Quantizer(2, 0.0)
    with pytest.raises(QuantizerError):
        Quantizer(2, -1.0)


def test_quantize_multibit_rejects_one_bit():
    with pytest.raises(QuantizerError):
        quantize_multibit(Quantizer(1, 1.0), np.zeros((2, 2)))


def test_init_scale_lsq_hand_computed():
    # absmeans 1 and 2, q_p = 1, equal sizes -> (2*1 + 2*2) / 2 = 3
    layers = [np.array([[1.0, -1.0]]), np.array([[2.0, -2.0]])]
    assert init_scale_lsq(layers, 2) == pytest.approx(3.0)


def test_init_scale_lsq_weighted_by_size():
    layers = [np.ones((1, 1)), 2.0 * np.ones((1, 3))]
    # q_p(2 bits) = 1: scales 2 and 4, sizes 1 and 3 -> (2 + 12)/4 = 3.5
    assert init_scale_lsq(layers, 2) == pytest.approx(3.5)


def test_init_scale_absmean_hand_computed():
    layers = [np.array([[1.0, -3.0]]), np.array([[0.0, 2.0]])]
    # absmeans 2 and 1, equal sizes -> 1.5
    assert init_scale_absmean(layers) == pytest.approx(1.5)


def test_init_scale_errors():
    with pytest.raises(QuantizerError):
        init_scale_lsq([], 2)
    with pytest.raises(QuantizerError):
        init_scale_lsq([np.ones((2, 2))], 1)
    with pytest.raises(QuantizerError):
        init_scale_lsq([np.zeros((2, 2))], 2)
    with pytest.raises(QuantizerError):
        init_scale_absmean([np.zeros((2, 2))])
