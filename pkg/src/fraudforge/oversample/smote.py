"""SMOTE: convex interpolation between minority rows and their neighbours."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TooFewMinoritySamples


@dataclass
class SmoteConfig:
    k_neighbors: int = 5
    n_synthetic: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.n_synthetic < 0:
            raise ValueError("n_synthetic must be >= 0")


def nearest_neighbors(x: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k Euclidean nearest neighbours of each row, self excluded.

    Brute force; distance ties resolve to the lower row index.
    """
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * x @ x.T
    np.fill_diagonal(d2, np.inf)
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def interpolate(base: np.ndarray, neighbor: np.ndarray, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=np.float64)
    if lam.ndim == 1:
        lam = lam[:, None]
    return base + lam * (neighbor - base)


def smote_generate(x_minority: np.ndarray, cfg: SmoteConfig) -> np.ndarray:
    x = np.asarray(x_minority, dtype=np.float64)
    if x.ndim != 2 or len(x) <= cfg.k_neighbors:
        raise TooFewMinoritySamples(
            f"SMOTE with k={cfg.k_neighbors} needs more than {cfg.k_neighbors} minority rows, "
            f"got {len(x) if x.ndim == 2 else 0}"
        )
    if cfg.n_synthetic == 0:
        return np.empty((0, x.shape[1]))
    rng = np.random.default_rng(cfg.seed)
    nn = nearest_neighbors(x, cfg.k_neighbors)
    base = rng.integers(0, len(x), size=cfg.n_synthetic)
    pick = rng.integers(0, cfg.k_neighbors, size=cfg.n_synthetic)
    lam = rng.random(cfg.n_synthetic)
    return interpolate(x[base], x[nn[base, pick]], lam)
