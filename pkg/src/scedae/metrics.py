"""External clustering indices: matched accuracy, NMI and ARI."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray  # k_pred x k_true
    n: int


def _labels(a, name):
    a = np.asarray(getattr(a, "labels", a))
    if a.ndim != 1:
        raise ValueError(f"{name} must be a 1-D label vector")
    return a


def contingency(pred, truth) -> ContingencyTable:
    pred = _labels(pred, "pred")
    truth = _labels(truth, "truth")
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} predicted vs {truth.size} true labels")
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    counts = np.zeros((pi.max(initial=-1) + 1, ti.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(counts, (pi, ti), 1)
    return ContingencyTable(counts, int(pred.size))


def hungarian(cost):
    """Minimum-cost one-to-one assignment; returns ``(rows, cols, total)``.

    Rectangular inputs match ``min(a, b)`` pairs.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost must be 2-D")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix has non-finite entries")
    rows, cols = linear_sum_assignment(cost)
    return rows, cols, float(cost[rows, cols].sum())


def accuracy(pred, truth) -> float:
    """Fraction of points correct under the best pred->truth label bijection."""
    table = contingency(pred, truth)
    if table.n == 0:
        raise ValueError("empty label vectors")
    _, _, total = hungarian(-table.counts)
    return -total / table.n


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """Mutual information normalised by the geometric mean of the entropies."""
    table = contingency(pred, truth)
    c = table.counts.astype(np.float64)
    h_pred = _entropy(c.sum(axis=1))
    h_true = _entropy(c.sum(axis=0))
    if h_pred == 0 or h_true == 0:
        return 1.0 if h_pred == h_true else 0.0
    n = table.n
    nz = c > 0
    outer = np.outer(c.sum(axis=1), c.sum(axis=0))
    mi = float((c[nz] / n * np.log(n * c[nz] / outer[nz])).sum())
    return max(0.0, mi / np.sqrt(h_pred * h_true))


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2


def ari(pred, truth) -> float:
    table = contingency(pred, truth)
    if table.n < 2:
        raise ValueError("ARI needs at least two points")
    c = table.counts
    index = _comb2(c).sum()
    a = _comb2(c.sum(axis=1)).sum()
    b = _comb2(c.sum(axis=0)).sum()
    expected = a * b / _comb2(table.n)
    denom = (a + b) / 2 - expected
    if denom == 0:
        warnings.warn("ARI denominator is zero; returning 1 by convention", RuntimeWarning, stacklevel=2)
        return 1.0
    return float((index - expected) / denom)
