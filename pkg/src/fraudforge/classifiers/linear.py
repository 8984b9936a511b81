"""Logistic regression and linear soft-margin SVM."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tensor as T
from ..data import Dataset
from ..errors import SingleClass, WidthMismatch
from ..tensor import Tensor


def _require_both_classes(labels: np.ndarray) -> None:
    if labels.size == 0 or labels.min() == labels.max():
        raise SingleClass("training data must contain both classes")


def _sigmoid64(m: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(m, dtype=np.float64)))


def _standardize(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    return (x - mu) / sd, mu, sd


def _fold(w: np.ndarray, b: float, mu: np.ndarray, sd: np.ndarray) -> tuple[np.ndarray, float]:
    """Map weights learned on standardized inputs back to raw inputs."""
    w_raw = w / sd
    return w_raw, float(b - w_raw @ mu)


def _check_width(rows: np.ndarray, weights: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != len(weights):
        raise WidthMismatch(f"expected {len(weights)} columns, got shape {rows.shape}")
    return rows


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float

    kind = "lr"

    def margin(self, rows) -> np.ndarray:
        rows = _check_width(rows, self.weights)
        return rows @ self.weights.astype(np.float64) + float(self.bias)

    def score(self, rows) -> np.ndarray:
        return _sigmoid64(self.margin(rows))


def lr_loss(w: Tensor, b: Tensor, x: Tensor, y: np.ndarray) -> Tensor:
    """Mean binary cross-entropy of the logistic model."""
    logits = x @ w + b
    return T.bce_with_logits(logits, y.reshape(-1, 1))


def lr_train(d: Dataset, epochs: int = 500, lr: float = 0.5, seed: int = 0) -> LogisticModel:
    """Full-batch gradient descent on mean BCE, starting from zero weights.

    Inputs are standardized for conditioning and the learned weights folded
    back, so the returned model scores raw rows. The objective is convex and
    the start point fixed, so ``seed`` does not change the result.
    """
    _require_both_classes(d.labels)
    xs, mu, sd = _standardize(d.features)
    x = Tensor(xs)
    y = d.labels.astype(np.float32)
    w = Tensor(np.zeros((d.n_features, 1)), requires_grad=True)
    b = Tensor(np.zeros(1), requires_grad=True)
    for _ in range(epochs):
        loss = lr_loss(w, b, x, y)
        w.grad = b.grad = None
        loss.backward()
        w.data -= np.float32(lr) * w.grad
        b.data -= np.float32(lr) * b.grad
    w_raw, b_raw = _fold(w.data.reshape(-1).astype(np.float64), float(b.data[0]), mu, sd)
    return LogisticModel(w_raw.astype(np.float32), float(np.float32(b_raw)))


def lr_predict(model: LogisticModel, rows) -> np.ndarray:
    return model.score(rows)


@dataclass
class LinearSvmModel:
    weights: np.ndarray
    bias: float
    C: float

    kind = "svm"

    def margin(self, rows) -> np.ndarray:
        rows = _check_width(rows, self.weights)
        return rows @ self.weights.astype(np.float64) + float(self.bias)

    def score(self, rows) -> np.ndarray:
        """Margins squashed through a sigmoid so that margin 0 maps to 0.5."""
        return _sigmoid64(self.margin(rows))


def svm_objective(w: np.ndarray, b: float, x: np.ndarray, y_pm: np.ndarray, C: float) -> float:
    hinge = np.maximum(0.0, 1.0 - y_pm * (x @ w + b))
    return 0.5 * float(w @ w) + C * float(hinge.sum())


def svm_train(
    d: Dataset, C: float = 1.0, epochs: int = 300, lr: float = 0.5, seed: int = 0
) -> LinearSvmModel:
    """Subgradient descent on ``0.5 ||w||^2 + C * sum(hinge)``.

    The objective is divided by the row count (same minimiser) so that
    ``lr`` does not depend on dataset size, and the step decays as
    ``lr / sqrt(t)``. Training runs on standardized inputs and the best
    iterate seen is folded back to raw-input weights.
    """
    if C <= 0:
        raise ValueError("C must be positive")
    _require_both_classes(d.labels)
    x, mu, sd = _standardize(d.features)
    n, p = x.shape
    y = np.where(d.labels == 1, 1.0, -1.0)
    w = np.zeros(p)
    b = 0.0
    best = (svm_objective(w, b, x, y, C), w.copy(), b)
    for t in range(1, epochs + 1):
        active = y * (x @ w + b) < 1.0
        gw = w / n - C * (y[active] @ x[active]) / n
        gb = -C * y[active].sum() / n
        step = lr / np.sqrt(t)
        w = w - step * gw
        b = b - step * gb
        obj = svm_objective(w, b, x, y, C)
        if obj < best[0]:
            best = (obj, w.copy(), b)
    _, w, b = best
    w, b = _fold(w, b, mu, sd)
    return LinearSvmModel(w.astype(np.float32), float(np.float32(b)), float(C))


def svm_score(model: LinearSvmModel, rows) -> np.ndarray:
    return model.score(rows)
