"""Binary classification metrics evaluated on the global test set."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError, UndefinedMetricError

THRESHOLD = 0.5


def _pair(a, b):
    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    if a.size != b.size:
        raise InvalidInputError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise InvalidInputError("empty input")
    return a, b


def to_predictions(probabilities) -> np.ndarray:
    return (np.asarray(probabilities) >= THRESHOLD).astype(np.int64)


def accuracy(predictions, labels) -> float:
    p, y = _pair(predictions, labels)
    return float(np.count_nonzero(p == y)) / p.size


def f1(predictions, labels) -> float:
    p, y = _pair(predictions, labels)
    tp = int(np.count_nonzero((p == 1) & (y == 1)))
    fp = int(np.count_nonzero((p == 1) & (y == 0)))
    fn = int(np.count_nonzero((p == 0) & (y == 1)))
    # 2PR/(P+R) reduces to 2tp/(2tp+fp+fn); one division keeps it correctly rounded
    if tp == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def average_ranks(values) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    _, inverse, counts = np.unique(np.asarray(values, dtype=np.float64), return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    mean_rank = upper - (counts - 1) / 2.0
    return mean_rank[inverse.reshape(-1)]


def auc_roc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 * P(tie)."""
    s, y = _pair(scores, labels)
    pos = y == 1
    n_pos = int(np.count_nonzero(pos))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative label")
    ranks = average_ranks(s)
    u = float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)
