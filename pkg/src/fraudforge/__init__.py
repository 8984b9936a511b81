"""Imbalanced fraud-detection toolkit: oversamplers, classifiers and an
evaluation grid, built on a small numpy autodiff core."""

__version__ = "0.1.0"
