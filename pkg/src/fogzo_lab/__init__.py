"""Quantization-aware-training laboratory.

Weight quantizers, straight-through-estimator surrogates, the smoothing
kernels they implicitly define, and zeroth-order / first-order-guided
gradient estimators, plus a small experiment runner around them.
"""

__version__ = "0.1.0"
