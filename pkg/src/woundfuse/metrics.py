"""Confusion-matrix metrics (accuracy/precision/recall/F1) and ROC curves.

All per-class scores are one-vs-rest: each class in turn is treated as the
positive class and every other as negative. Aggregates are support-weighted,
except accuracy which is the plain fraction of correct predictions
(trace / total). Degenerate denominators score 0 rather than raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


class MetricsError(ValueError):
    """Raised for malformed confusion matrices or score arrays."""


def accuracy_score(tp: int, tn: int, fp: int, fn: int) -> float:
    denom = tp + tn + fp + fn
    return (tp + tn) / denom if denom else 0.0


def precision_score(tp: int, fp: int) -> float:
    denom = tp + fp
    return tp / denom if denom else 0.0


def recall_score(tp: int, fn: int) -> float:
    denom = tp + fn
    return tp / denom if denom else 0.0


def f1_score(precision: float, recall: float) -> float:
    denom = precision + recall
    return 2.0 * precision * recall / denom if denom else 0.0


@dataclass(frozen=True)
class ConfusionMatrix:
    """Square count matrix with rows = true class, columns = predicted class."""

    counts: np.ndarray
    class_tags: tuple[str, ...] | None = None

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise MetricsError(f"confusion matrix must be square, got shape {counts.shape}")
        if counts.shape[0] < 2:
            raise MetricsError("confusion matrix needs at least two classes")
        if (counts < 0).any():
            raise MetricsError("confusion matrix counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        if self.class_tags is not None:
            if len(self.class_tags) != counts.shape[0]:
                raise MetricsError(
                    f"{len(self.class_tags)} class tags for a {counts.shape[0]}-class matrix"
                )
            object.__setattr__(self, "class_tags", tuple(self.class_tags))

    @classmethod
    def from_predictions(
        cls,
        y_true: Sequence[int],
        y_pred: Sequence[int],
        num_classes: int,
        class_tags: Sequence[str] | None = None,
    ) -> "ConfusionMatrix":
        y_true = np.asarray(y_true, dtype=np.int64)
        y_pred = np.asarray(y_pred, dtype=np.int64)
        if y_true.shape != y_pred.shape or y_true.ndim != 1:
            raise MetricsError(
                f"labels and predictions must be equal-length 1-d arrays, got {y_true.shape} vs {y_pred.shape}"
            )
        for name, arr in (("label", y_true), ("prediction", y_pred)):
            if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
                raise MetricsError(f"{name} outside [0, {num_classes})")
        counts = np.zeros((num_classes, num_classes), dtype=np.int64)
        np.add.at(counts, (y_true, y_pred), 1)
        return cls(counts, None if class_tags is None else tuple(class_tags))

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def support(self, index: int) -> int:
        return int(self.counts[index].sum())

    def tp(self, index: int) -> int:
        return int(self.counts[index, index])

    def fp(self, index: int) -> int:
        return int(self.counts[:, index].sum() - self.counts[index, index])

    def fn(self, index: int) -> int:
        return int(self.counts[index].sum() - self.counts[index, index])

    def tn(self, index: int) -> int:
        return self.total - self.tp(index) - self.fp(index) - self.fn(index)

    def to_dict(self) -> dict:
        return {
            "counts": self.counts.tolist(),
            "class_tags": None if self.class_tags is None else list(self.class_tags),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ConfusionMatrix":
        tags = data.get("class_tags")
        return cls(np.asarray(data["counts"], dtype=np.int64), None if tags is None else tuple(tags))


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    per_class: dict
    class_tags: tuple[str, ...]
    split_scheme: str | None = None
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_class": self.per_class,
            "class_tags": list(self.class_tags),
            "split_scheme": self.split_scheme,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MetricsReport":
        return cls(
            accuracy=float(data["accuracy"]),
            precision=float(data["precision"]),
            recall=float(data["recall"]),
            f1=float(data["f1"]),
            per_class=dict(data["per_class"]),
            class_tags=tuple(data["class_tags"]),
            split_scheme=data.get("split_scheme"),
            seed=data.get("seed"),
        )


def compute_metrics(
    cm: ConfusionMatrix,
    split_scheme: str | None = None,
    seed: int | None = None,
) -> MetricsReport:
    """Score a confusion matrix: per-class one-vs-rest plus weighted aggregates."""
    total = cm.total
    if total == 0:
        raise MetricsError("confusion matrix holds no samples")
    tags = cm.class_tags or tuple(str(i) for i in range(cm.num_classes))
    per_class = {}
    weighted = {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    for index, tag in enumerate(tags):
        tp, fp, fn, tn = cm.tp(index), cm.fp(index), cm.fn(index), cm.tn(index)
        precision = precision_score(tp, fp)
        recall = recall_score(tp, fn)
        f1 = f1_score(precision, recall)
        support = cm.support(index)
        per_class[tag] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "accuracy": accuracy_score(tp, tn, fp, fn),
            "support": support,
            "tp": tp,
            "fp": fp,
            "fn": fn,
            "tn": tn,
        }
        weighted["precision"] += support * precision
        weighted["recall"] += support * recall
        weighted["f1"] += support * f1
    return MetricsReport(
        accuracy=float(np.trace(cm.counts)) / total,
        precision=weighted["precision"] / total,
        recall=weighted["recall"] / total,
        f1=weighted["f1"] / total,
        per_class=per_class,
        class_tags=tags,
        split_scheme=split_scheme,
        seed=seed,
    )


def binary_roc(labels: np.ndarray, scores: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ROC sweep for one binary problem: returns (fpr, tpr, thresholds).

    Thresholds run from +inf (predict nothing positive) down through each
    distinct score, so the curve starts at (0, 0) and ends at (1, 1) whenever
    both outcomes are present. Ties share a single curve point.
    """
    labels = np.asarray(labels).astype(bool)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape or labels.ndim != 1:
        raise MetricsError("labels and scores must be equal-length 1-d arrays")
    order = np.argsort(-scores, kind="stable")
    labels = labels[order]
    scores = scores[order]
    positives = int(labels.sum())
    negatives = labels.size - positives
    # one curve point after each run of tied scores
    distinct = np.nonzero(np.diff(scores))[0]
    cut = np.concatenate([distinct, [labels.size - 1]]) if labels.size else np.array([], dtype=int)
    cum_tp = np.cumsum(labels)[cut] if labels.size else np.array([], dtype=np.int64)
    cum_fp = np.cumsum(~labels)[cut] if labels.size else np.array([], dtype=np.int64)
    tpr = cum_tp / positives if positives else np.zeros_like(cum_tp, dtype=np.float64)
    fpr = cum_fp / negatives if negatives else np.zeros_like(cum_fp, dtype=np.float64)
    thresholds = np.concatenate([[np.inf], scores[cut]]) if labels.size else np.array([np.inf])
    return (
        np.concatenate([[0.0], fpr]),
        np.concatenate([[0.0], tpr]),
        thresholds,
    )


def auc_trapezoid(fpr: np.ndarray, tpr: np.ndarray) -> float:
    return float(np.trapezoid(tpr, fpr))


def roc_points(
    y_true: Sequence[int],
    probabilities: np.ndarray,
    class_tags: Sequence[str] | None = None,
) -> dict:
    """One-vs-rest ROC points and AUCs per class, plus micro and macro aggregates.

    The micro curve pools every (sample, class) indicator/score pair into one
    binary sweep; the macro AUC averages the per-class AUCs of classes that
    actually appear. Classes with no positives (or no negatives) keep their
    points but report a null AUC.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if probabilities.ndim != 2 or probabilities.shape[0] != y_true.shape[0]:
        raise MetricsError(
            f"probabilities must be (n_samples, n_classes), got {probabilities.shape} for {y_true.shape[0]} labels"
        )
    num_classes = probabilities.shape[1]
    if y_true.size == 0:
        raise MetricsError("no samples to sweep")
    if y_true.min() < 0 or y_true.max() >= num_classes:
        raise MetricsError(f"label outside [0, {num_classes})")
    tags = tuple(class_tags) if class_tags is not None else tuple(str(i) for i in range(num_classes))
    if len(tags) != num_classes:
        raise MetricsError(f"{len(tags)} class tags for {num_classes} score columns")

    per_class = []
    defined_aucs = []
    for index, tag in enumerate(tags):
        indicator = (y_true == index).astype(np.int64)
        fpr, tpr, _ = binary_roc(indicator, probabilities[:, index])
        has_both = 0 < indicator.sum() < indicator.size
        auc = auc_trapezoid(fpr, tpr) if has_both else None
        if auc is not None:
            defined_aucs.append(auc)
        per_class.append(
            {
                "class": tag,
                "points": [[float(f), float(t)] for f, t in zip(fpr, tpr)],
                "auc": auc,
            }
        )

    onehot = np.zeros_like(probabilities, dtype=np.int64)
    onehot[np.arange(y_true.size), y_true] = 1
    micro_fpr, micro_tpr, _ = binary_roc(onehot.ravel(), probabilities.ravel())
    micro_auc = auc_trapezoid(micro_fpr, micro_tpr)

    return {
        "per_class": per_class,
        "micro": {
            "points": [[float(f), float(t)] for f, t in zip(micro_fpr, micro_tpr)],
            "auc": micro_auc,
        },
        "macro_auc": float(np.mean(defined_aucs)) if defined_aucs else None,
    }
