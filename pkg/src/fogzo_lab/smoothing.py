"""Perturbation distributions and the implicit smoothing kernel of each STE.

Every surrogate equals the expectation of its target operator under a
specific zero-mean unit-variance perturbation at a specific smoothing
magnitude.  ``implicit_pair`` returns that (eps_bar, distribution) pair;
``smoothed_value_mc`` is the Monte-Carlo oracle used to certify the
correspondence numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .surrogate import (
    APPROX_SIGN,
    CGM,
    HARDTANH,
    IDENTITY,
    TANH,
    SurrogateKind,
)
from .tensor import Rng

SQRT3 = np.sqrt(3.0)
SQRT6 = np.sqrt(6.0)


class PerturbationDist:
    """Symmetric, zero-mean, unit-variance scalar distribution.

    Multidimensional perturbations are i.i.d. per-coordinate draws.
    """

    name: str

    def sample(self, rng: Rng, size=None):
        raise NotImplementedError

    def pdf(self, u):
        raise NotImplementedError


@dataclass(frozen=True)
class UniformDist(PerturbationDist):
    """Uniform on (-sqrt(3), sqrt(3))."""

    name: str = "uniform"

    def sample(self, rng: Rng, size=None):
        return rng.uniform(-SQRT3, SQRT3, size=size)

    def pdf(self, u):
        u = np.asarray(u, dtype=np.float64)
        return np.where(np.abs(u) <= SQRT3, 1.0 / (2.0 * SQRT3), 0.0)


@dataclass(frozen=True)
class LogisticKernelDist(PerturbationDist):
    """PDF eps_bar*(1 - tanh^2(eps_bar*u))/2: a logistic distribution with
    scale 1/(2*eps_bar).  Unit variance when eps_bar = pi/sqrt(12)."""

    eps_bar: float = np.pi / np.sqrt(12.0)
    name: str = "logistic"

    def sample(self, rng: Rng, size=None):
        u = rng.random(size=size)
        # guard the measure-zero u == 0 draw: 2u - 1 must stay above -1
        u = np.maximum(u, 2.0 ** -53)
        return np.arctanh(2.0 * u - 1.0) / self.eps_bar

    def pdf(self, u):
        u = np.asarray(u, dtype=np.float64)
        t = np.tanh(self.eps_bar * u)
        return self.eps_bar * (1.0 - t * t) / 2.0


@dataclass(frozen=True)
class TriangularDist(PerturbationDist):
    """Triangular on (-sqrt(6), sqrt(6)), PDF tri(u/sqrt(6))/sqrt(6)."""

    name: str = "triangular"

    def sample(self, rng: Rng, size=None):
        return SQRT6 * (rng.random(size=size) + rng.random(size=size) - 1.0)

    def pdf(self, u):
        u = np.asarray(u, dtype=np.float64)
        scaled = np.abs(u) / SQRT6
        return np.where(scaled <= 1.0, (1.0 - scaled) / SQRT6, 0.0)


@dataclass(frozen=True)
class StandardNormalDist(PerturbationDist):
    name: str = "normal"

    def sample(self, rng: Rng, size=None):
        return rng.standard_normal(size=size)

    def pdf(self, u):
        u = np.asarray(u, dtype=np.float64)
        return np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi)


_DIST_REGISTRY = {
    "uniform": UniformDist,
    "logistic": LogisticKernelDist,
    "triangular": TriangularDist,
    "normal": StandardNormalDist,
}


def dist_from_name(name: str) -> PerturbationDist:
    try:
        return _DIST_REGISTRY[name]()
    except KeyError:
        raise ValueError(
            f"unknown perturbation distribution {name!r}; choose from {sorted(_DIST_REGISTRY)}"
        ) from None


@dataclass(frozen=True)
class SmoothingPair:
    eps_bar: float
    dist: PerturbationDist


def implicit_pair(kind: SurrogateKind) -> SmoothingPair:
    """The (eps_bar, distribution) under which smoothing the target
    operator reproduces the surrogate exactly."""
    if kind.variant == IDENTITY:
        return SmoothingPair(1.0 / (2.0 * SQRT3), UniformDist())
    if kind.variant == HARDTANH:
        return SmoothingPair(1.0 / SQRT3, UniformDist())
    if kind.variant == TANH:
        eps_bar = np.pi / np.sqrt(12.0)
        return SmoothingPair(eps_bar, LogisticKernelDist(eps_bar))
    if kind.variant == APPROX_SIGN:
        return SmoothingPair(1.0 / SQRT6, TriangularDist())
    if kind.variant == CGM:
        return SmoothingPair(kind.threshold / SQRT3, UniformDist())
    raise ValueError(f"unknown surrogate variant {kind.variant!r}")


def sample(dist: PerturbationDist, rng: Rng) -> float:
    """One scalar draw from the perturbation distribution."""
    return float(dist.sample(rng))


def smoothed_value_mc(h, x: float, eps: float, dist: PerturbationDist,
                      n_samples: int, rng: Rng) -> tuple[float, float]:
    """Monte-Carlo estimate of E[h(x + eps*u)] with its standard error."""
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    u = dist.sample(rng, size=n_samples)
    values = np.asarray(h(x + eps * u), dtype=np.float64)
    estimate = float(np.mean(values))
    if n_samples == 1:
        return estimate, float("inf")
    stderr = float(np.std(values, ddof=1) / np.sqrt(n_samples))
    return estimate, stderr


def fogzo_epsilon(alpha: float, eps_bar: float, c: float = 1.0) -> float:
    """Scale-aware smoothing magnitude c * alpha * eps_bar."""
    for name, value in (("alpha", alpha), ("eps_bar", eps_bar), ("c", c)):
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")
    return c * alpha * eps_bar
