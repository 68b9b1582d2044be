import os
from pathlib import Path

import numpy as np

from fogzo_lab.tensor import Rng, fork_stream

REPO_ROOT = Path(__file__).resolve().parent.parent


def mnist_dir() -> Path | None:
    """Directory holding the four MNIST IDX files, or None if absent."""
    env = os.environ.get("FOGZO_MNIST_DIR")
    candidates = [Path(env)] if env else []
    candidates.append(REPO_ROOT / "data")
    for cand in candidates:
        if cand.is_dir() and any(cand.glob("train-images-idx3-ubyte*")):
            return cand
    return None


def random_symmetric(dim: int, rng: Rng) -> np.ndarray:
    b = rng.standard_normal((dim, dim))
    return (b + b.T) / 2.0


def quadratic_problem(dim: int, seed: int):
    """Shared quadratic test objective: (A, theta, A @ theta)."""
    root = Rng(seed)
    a = random_symmetric(dim, fork_stream(root, 0))
    theta = fork_stream(root, 1).standard_normal(dim)
    return a, theta, a @ theta
