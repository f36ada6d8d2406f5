"""Average precision and mean average precision for multi-label ranking."""

import warnings

import numpy as np


def _ranking(scores):
    # stable sort on negated scores: descending, ties by ascending index
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def average_precision(scores, relevance, interpolated=False):
    """Average precision of a single ranking.

    Items are sorted by descending score, ties broken by ascending original
    index. The default is non-interpolated AP: the mean, over relevant items,
    of the precision at each relevant item's rank. With ``interpolated=True``
    the 11-point interpolated variant is returned instead (mean of the best
    precision at recall >= 0, 0.1, ..., 1).
    """
    scores = np.asarray(scores, dtype=np.float64)
    rel = np.asarray(relevance).astype(bool)
    if scores.shape != rel.shape or scores.ndim != 1:
        raise ValueError(f"scores {scores.shape} and relevance {rel.shape} must be matching vectors")
    n_rel = int(rel.sum())
    if n_rel == 0:
        raise ValueError("average precision needs at least one relevant item")
    hits = rel[_ranking(scores)]
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, hits.size + 1)
    if not interpolated:
        return float(np.sum(precision[hits]) / n_rel)
    recall = tp / n_rel
    total = 0.0
    for t in np.linspace(0.0, 1.0, 11):
        mask = recall >= t - 1e-12
        total += precision[mask].max() if np.any(mask) else 0.0
    return float(total / 11)


def mean_ap(scores, labels, interpolated=False):
    """Unweighted mean of per-class AP.

    Returns ``(map, per_class)`` where ``per_class`` holds NaN for classes
    without any positive sample; those are skipped with a warning.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 2:
        raise ValueError(f"scores {scores.shape} and labels {labels.shape} must be matching matrices")
    per_class = np.full(scores.shape[1], np.nan)
    for c in range(scores.shape[1]):
        if not np.any(labels[:, c]):
            warnings.warn(f"class {c} has no positive samples and is excluded from mAP")
            continue
        per_class[c] = average_precision(scores[:, c], labels[:, c], interpolated)
    if np.all(np.isnan(per_class)):
        raise ValueError("no class has a positive sample; mAP is undefined")
    return float(np.nanmean(per_class)), per_class
