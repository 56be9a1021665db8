"""External (ACC, NMI, ARI) and internal (SC, DBI, CHI) clustering metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist


def _pair(pred, truth):
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {truth.size} labels")
    return pred, truth


def contingency(pred, truth) -> np.ndarray:
    pred, truth = _pair(pred, truth)
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max(initial=-1) + 1, t.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def accuracy(pred, truth) -> float:
    """Best one-to-one cluster-to-class matching; unmatched clusters count as errors."""
    pred, truth = _pair(pred, truth)
    if pred.size == 0:
        raise ValueError("empty label vectors")
    table = contingency(pred, truth)
    size = max(table.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[:table.shape[0], :table.shape[1]] = table
    rows, cols = linear_sum_assignment(padded, maximize=True)
    return float(padded[rows, cols].sum() / pred.size)


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    # fsum is exactly rounded, so the value does not depend on cluster order
    return -math.fsum(p * np.log(p))


def nmi(pred, truth) -> float:
    """Mutual information over the arithmetic mean of the two entropies (natural log)."""
    pred, truth = _pair(pred, truth)
    n = pred.size
    if n == 0:
        raise ValueError("empty label vectors")
    table = contingency(pred, truth).astype(np.float64)
    h_pred = _entropy(table.sum(axis=1), n)
    h_truth = _entropy(table.sum(axis=0), n)
    denom = 0.5 * (h_pred + h_truth)
    if denom <= 0:
        # both partitions put every node in one cluster, hence identical
        return 1.0
    nz = table > 0
    outer = np.outer(table.sum(axis=1), table.sum(axis=0))
    mi = math.fsum(table[nz] / n * np.log(table[nz] * n / outer[nz]))
    return float(np.clip(mi / denom, 0.0, 1.0))


def _comb2(x):
    x = np.asarray(x, dtype=np.int64)
    return x * (x - 1) // 2


def ari(pred, truth) -> float:
    """Adjusted Rand index by pair counting with the expected-index correction."""
    pred, truth = _pair(pred, truth)
    n = pred.size
    table = contingency(pred, truth)
    sum_cells = int(_comb2(table).sum())
    sum_rows = int(_comb2(table.sum(axis=1)).sum())
    sum_cols = int(_comb2(table.sum(axis=0)).sum())
    total = int(_comb2(n))
    if total == 0:
        return 1.0
    expected = sum_rows * sum_cols / total
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        # both partitions trivial in the same way (all singletons or one block)
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def _check_internal(points, assignment):
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(assignment).ravel()
    if points.ndim != 2 or points.shape[0] != labels.size:
        raise ValueError(f"points {points.shape} do not match {labels.size} assignments")
    uniq, labels = np.unique(labels, return_inverse=True)
    if uniq.size < 2:
        raise ValueError("internal metrics need at least two clusters")
    return points, labels, uniq.size


def silhouette(points, assignment) -> float:
    points, labels, k = _check_internal(points, assignment)
    n = labels.size
    dist = cdist(points, points)
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((n, k))
    for j in range(k):
        sums[:, j] = dist[:, labels == j].sum(axis=1)
    own = counts[labels]
    a = np.where(own > 1, sums[np.arange(n), labels] / np.maximum(own - 1, 1), 0.0)
    means = sums / counts[None, :]
    means[np.arange(n), labels] = np.inf
    b = means.min(axis=1)
    top = np.maximum(a, b)
    s = np.where(top > 0, (b - a) / np.where(top > 0, top, 1.0), 0.0)
    s[own == 1] = 0.0
    return float(s.mean())


def _centroids(points, labels, k):
    return np.array([points[labels == j].mean(axis=0) for j in range(k)])


def davies_bouldin(points, assignment) -> float:
    """Lower is better; coincident centroids make the pair ratio ``+inf``."""
    points, labels, k = _check_internal(points, assignment)
    cents = _centroids(points, labels, k)
    spread = np.array([
        np.linalg.norm(points[labels == j] - cents[j], axis=1).mean() for j in range(k)
    ])
    sep = cdist(cents, cents)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (spread[:, None] + spread[None, :]) / sep
    ratio[sep == 0] = np.inf
    np.fill_diagonal(ratio, -np.inf)
    return float(ratio.max(axis=1).mean())


def calinski_harabasz(points, assignment) -> float:
    """Between/within dispersion ratio; ``+inf`` when within-cluster dispersion is zero."""
    points, labels, k = _check_internal(points, assignment)
    n = labels.size
    if k >= n:
        raise ValueError(f"Calinski-Harabasz needs k < n, got k={k}, n={n}")
    cents = _centroids(points, labels, k)
    counts = np.bincount(labels, minlength=k)
    center = points.mean(axis=0)
    between = float((counts * ((cents - center) ** 2).sum(axis=1)).sum())
    within = float(((points - cents[labels]) ** 2).sum())
    if within == 0:
        return float("inf")
    return between * (n - k) / (within * (k - 1))


@dataclass
class MetricBundle:
    acc: float | None = None
    nmi: float | None = None
    ari: float | None = None
    sc: float | None = None
    dbi: float | None = None
    chi: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def external_metrics(pred, truth) -> MetricBundle:
    return MetricBundle(acc=accuracy(pred, truth), nmi=nmi(pred, truth), ari=ari(pred, truth))


def internal_metrics(points, assignment) -> MetricBundle:
    """SC, DBI and CHI; a metric undefined for this partition is left as ``None``."""
    out = MetricBundle()
    labels = np.asarray(assignment)
    k = np.unique(labels).size
    if k < 2:
        return out
    out.sc = silhouette(points, labels)
    out.dbi = davies_bouldin(points, labels)
    if k < labels.size:
        out.chi = calinski_harabasz(points, labels)
    return out


def evaluate(points, assignment, truth=None) -> MetricBundle:
    bundle = internal_metrics(points, assignment)
    if truth is not None:
        ext = external_metrics(assignment, truth)
        bundle.acc, bundle.nmi, bundle.ari = ext.acc, ext.nmi, ext.ari
    return bundle
