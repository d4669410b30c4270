"""Exact ranking metrics for binary next-step predictions.

ROC-AUC uses the rank statistic (Mann-Whitney), so tied scores count half
a concordant pair. Average precision integrates precision over recall
steps at each distinct score threshold (no trapezoid smoothing), with
tied scores entering as one group. Accuracy thresholds at 0.5 and counts
a score of exactly 0.5 as a positive prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_binary_labels, check_same_length, check_scores


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    # boundaries of runs of equal values
    starts = np.r_[True, sorted_scores[1:] != sorted_scores[:-1]]
    group = np.cumsum(starts) - 1
    counts = np.bincount(group)
    firsts = np.r_[0, np.cumsum(counts)[:-1]]
    mean_rank = firsts + (counts - 1) / 2.0 + 1.0
    ranks = np.empty_like(scores)
    ranks[order] = mean_rank[group]
    return ranks


def roc_auc(scores, labels) -> float:
    """Probability a random positive outranks a random negative (ties half)."""
    s = check_scores(scores, "roc_auc")
    y = check_binary_labels(labels, "roc_auc")
    check_same_length(s, y, "roc_auc")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        only = 1 if n_neg == 0 else 0
        raise ValueError(f"roc_auc: only class {only} present; AUC undefined")
    ranks = _average_ranks(s)
    rank_sum = ranks[y == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def accuracy(scores, labels, threshold: float = 0.5) -> float:
    s = check_scores(scores, "accuracy")
    y = check_binary_labels(labels, "accuracy")
    check_same_length(s, y, "accuracy")
    predicted = (s >= threshold).astype(np.int64)
    return float(np.mean(predicted == y))


def average_precision(scores, labels) -> float:
    """Step-integrated area under the precision-recall curve."""
    s = check_scores(scores, "average_precision")
    y = check_binary_labels(labels, "average_precision")
    check_same_length(s, y, "average_precision")
    n_pos = int(y.sum())
    if n_pos == 0:
        raise ValueError("average_precision: no positive labels; AP undefined")
    order = np.argsort(-s, kind="stable")
    sorted_scores = s[order]
    sorted_labels = y[order]
    # index of the last element in each tie group = a distinct threshold
    distinct = np.where(np.r_[sorted_scores[1:] != sorted_scores[:-1], True])[0]
    tps = np.cumsum(sorted_labels)[distinct].astype(np.float64)
    fps = distinct + 1.0 - tps
    precision = tps / (tps + fps)
    recall = tps / n_pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


@dataclass
class MetricsReport:
    """Evaluation summary for one prediction set."""

    auc: float
    acc: float
    aucprc: float
    n_predictions: int
    n_positive: int
    threshold: float = 0.5
    fold_id: int | None = None

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "acc": self.acc,
            "aucprc": self.aucprc,
            "n_predictions": self.n_predictions,
            "n_positive": self.n_positive,
            "threshold": self.threshold,
            "fold_id": self.fold_id,
        }


def evaluate_predictions(scores, labels, threshold: float = 0.5,
                         fold_id: int | None = None) -> MetricsReport:
    s = check_scores(scores, "evaluate_predictions")
    y = check_binary_labels(labels, "evaluate_predictions")
    check_same_length(s, y, "evaluate_predictions")
    return MetricsReport(
        auc=roc_auc(s, y),
        acc=accuracy(s, y, threshold),
        aucprc=average_precision(s, y),
        n_predictions=int(s.size),
        n_positive=int(y.sum()),
        threshold=threshold,
        fold_id=fold_id,
    )
