"""Threshold metrics and rank-based ROC-AUC for imbalanced evaluation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .errors import LengthMismatch, SingleClass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _validate(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise LengthMismatch(f"{len(scores)} scores vs {len(labels)} labels")
    if labels.size and not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return scores, labels.astype(np.int64)


def confusion_at_threshold(scores, labels, t: float = 0.5) -> ConfusionMatrix:
    """Predict positive iff ``score >= t``."""
    scores, labels = _validate(scores, labels)
    pred = scores >= t
    pos = labels == 1
    return ConfusionMatrix(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        tn=int(np.sum(~pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


def precision(c: ConfusionMatrix) -> float:
    den = c.tp + c.fp
    return c.tp / den if den else 0.0


def recall(c: ConfusionMatrix) -> float:
    den = c.tp + c.fn
    return c.tp / den if den else 0.0


def f1_from(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


def f1(c: ConfusionMatrix) -> float:
    return f1_from(precision(c), recall(c))


def accuracy(c: ConfusionMatrix) -> float:
    return (c.tp + c.tn) / c.total if c.total else 0.0


def roc_auc_exact(scores, labels) -> Fraction:
    """Mann-Whitney AUC as an exact fraction (ties count one half).

    Ranks are tracked doubled so tied groups' average ranks stay integral.
    """
    scores, labels = _validate(scores, labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC-AUC needs both classes")
    order = np.argsort(scores, kind="mergesort")
    s = scores[order]
    y = labels[order]
    # group boundaries of equal scores
    starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
    ends = np.r_[starts[1:], len(s)]
    pos_in_group = np.add.reduceat(y, starts)
    # doubled average 1-based rank of group [a, b) is a + b + 1
    doubled = starts + ends + 1
    rank_sum2 = int(np.dot(pos_in_group.astype(object), doubled.astype(object)))
    u2 = rank_sum2 - n_pos * (n_pos + 1)
    return Fraction(u2, 2 * n_pos * n_neg)


def roc_auc(scores, labels) -> float:
    return float(roc_auc_exact(scores, labels))


def auc_pair_count(scores, labels) -> float:
    """Brute-force AUC over every positive x negative pair."""
    scores, labels = _validate(scores, labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise SingleClass("ROC-AUC needs both classes")
    wins = 0
    ties = 0
    for p in pos:
        wins += int(np.sum(p > neg))
        ties += int(np.sum(p == neg))
    return float(Fraction(2 * wins + ties, 2 * len(pos) * len(neg)))


@dataclass
class MetricsReport:
    method: str
    classifier: str
    seed: int
    threshold: float
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float
    confusion: ConfusionMatrix
    # metrics whose 0/0 case was reported as 0.0
    undefined: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["confusion"] = asdict(self.confusion)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        d = dict(d)
        d["confusion"] = ConfusionMatrix(**d["confusion"])
        return cls(**d)


def report(method: str, classifier: str, seed: int, scores, labels, t: float = 0.5) -> MetricsReport:
    c = confusion_at_threshold(scores, labels, t)
    p, r = precision(c), recall(c)
    undefined = []
    if c.tp + c.fp == 0:
        undefined.append("precision")
    if c.tp + c.fn == 0:
        undefined.append("recall")
    if p + r == 0:
        undefined.append("f1")
    try:
        auc = roc_auc(scores, labels)
    except SingleClass:
        auc = 0.0
        undefined.append("auc")
    return MetricsReport(
        method=method,
        classifier=classifier,
        seed=int(seed),
        threshold=float(t),
        accuracy=accuracy(c),
        precision=p,
        recall=r,
        f1=f1_from(p, r),
        auc=auc,
        confusion=c,
        undefined=undefined,
    )
