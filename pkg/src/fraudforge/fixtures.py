"""Synthetic datasets used by the tests, the CI grid and the scripts."""

from __future__ import annotations

import numpy as np

from .data import Dataset


def two_gaussians(
    n_neg: int,
    n_pos: int,
    n_features: int,
    separation: float,
    seed: int = 0,
    sigma: float = 1.0,
) -> Dataset:
    """Isotropic Gaussian classes; every coordinate of the positive mean is
    shifted by ``separation * sigma`` from the negative mean (the origin).

    Rows are shuffled so the label order carries no information.
    """
    rng = np.random.default_rng(seed)
    neg = rng.normal(0.0, sigma, size=(n_neg, n_features))
    pos = rng.normal(separation * sigma, sigma, size=(n_pos, n_features))
    x = np.vstack([neg, pos])
    y = np.concatenate([np.zeros(n_neg, dtype=np.int64), np.ones(n_pos, dtype=np.int64)])
    order = rng.permutation(len(y))
    names = [f"f{i + 1}" for i in range(n_features)]
    return Dataset(x[order], y[order], names)


def blob_fixture(seed: int = 2024) -> Dataset:
    """The shipped desk-scale fraud stand-in: 10,000 negatives, 50 positives,
    8 features, 2 sigma separation."""
    return two_gaussians(10_000, 50, 8, 2.0, seed=seed)


def separable_fixture(seed: int = 7) -> Dataset:
    """500 + 500 points in 2-D, 3 sigma separation."""
    return two_gaussians(500, 500, 2, 3.0, seed=seed)


def gaussian_blob(n: int = 256, mean=(1.0, -1.0), std: float = 1.0, seed: int = 0) -> np.ndarray:
    """Unlabelled minority blob for generative-model sanity checks."""
    rng = np.random.default_rng(seed)
    mean = np.asarray(mean, dtype=np.float64)
    return rng.normal(mean, std, size=(n, len(mean)))
