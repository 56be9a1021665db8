"""Spectral clustering on a reconstructed adjacency, and seeded k-means."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

LAPLACIAN_MODES = ("original", "reconstructed")


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a valid result."""


@dataclass(frozen=True)
class SpectralEmbedding:
    matrix: np.ndarray  # n x k, orthonormal columns
    eigenvalues: np.ndarray  # ascending


@dataclass
class ClusteringResult:
    assignment: np.ndarray
    k: int
    inertia: float
    embedding_ref: str = "points"
    embedding: SpectralEmbedding | None = None
    history: list[float] = field(default_factory=list, repr=False)


def build_laplacian(deg: np.ndarray, a_hat: np.ndarray, mode: str = "original") -> np.ndarray:
    """``L = D - a_hat`` with ``D`` the graph degrees (``original``) or row sums of ``a_hat``."""
    if mode not in LAPLACIAN_MODES:
        raise ValueError(f"unknown laplacian mode {mode!r}; expected one of {LAPLACIAN_MODES}")
    n = a_hat.shape[0]
    if a_hat.shape != (n, n):
        raise ValueError(f"a_hat must be square, got {a_hat.shape}")
    asym = np.abs(a_hat - a_hat.T).max() if n else 0.0
    if asym > 1e-9:
        raise ValueError(f"a_hat is not symmetric (max deviation {asym:.3g})")
    if mode == "original":
        deg = np.asarray(deg, dtype=np.float64).ravel()
        if deg.shape != (n,):
            raise ValueError(f"degree vector length {deg.size} does not match {n}")
    else:
        deg = a_hat.sum(axis=1)
    lap = -a_hat.astype(np.float64, copy=True)
    lap[np.diag_indices(n)] += deg
    return lap


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Make the first non-negligible entry of every column positive."""
    tol = 1e-12 * np.maximum(np.abs(vecs).max(axis=0), 1e-300)
    lead = np.argmax(np.abs(vecs) > tol, axis=0)
    signs = np.sign(vecs[lead, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def smallest_k_eigvecs(lap: np.ndarray, k: int) -> SpectralEmbedding:
    """Orthonormal eigenvectors of the ``k`` algebraically smallest eigenvalues."""
    n = lap.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    try:
        vals, vecs = scipy.linalg.eigh(lap, subset_by_index=[0, k - 1], driver="evr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"symmetric eigensolver failed for n={n}, k={k}: {exc}") from exc
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(vecs))):
        raise NumericalError(f"symmetric eigensolver returned non-finite values (n={n}, k={k})")
    vecs = _fix_signs(vecs)
    scale = np.linalg.norm(lap)
    resid = np.linalg.norm(lap @ vecs - vecs * vals, axis=0)
    worst = int(np.argmax(resid))
    if resid[worst] > 1e-8 * scale:
        raise NumericalError(
            f"eigenpair {worst} residual {resid[worst]:.3g} exceeds 1e-8*||L|| = {1e-8 * scale:.3g}"
        )
    return SpectralEmbedding(vecs, vals)


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        np.einsum("ij,ij->i", points, points)[:, None]
        - 2.0 * points @ centers.T
        + np.einsum("ij,ij->i", centers, centers)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = _sq_dists(points, points[chosen])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            cum = np.cumsum(closest)
            # side="right" lands on the first point with positive mass past the draw
            idx = int(np.searchsorted(cum, rng.random() * total, side="right"))
        else:
            taken = set(chosen)
            idx = next(i for i in range(n) if i not in taken)
        chosen.append(idx)
        closest = np.minimum(closest, _sq_dists(points, points[idx:idx + 1])[:, 0])
    return points[chosen].astype(np.float64, copy=True)


def _repair_empty(labels: np.ndarray, d2: np.ndarray, k: int) -> np.ndarray:
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        own = d2[np.arange(labels.size), labels]
        movable = counts[labels] > 1
        own = np.where(movable, own, -np.inf)
        i = int(np.argmax(own))
        counts[labels[i]] -= 1
        labels[i] = j
        counts[j] = 1
    return labels


def _lloyd(points, centers, max_iter, tol):
    k = centers.shape[0]
    labels = None
    history: list[float] = []
    for _ in range(max_iter):
        d2 = _sq_dists(points, centers)
        new_labels = _repair_empty(np.argmin(d2, axis=1), d2, k)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centers = np.array([points[labels == j].mean(axis=0) for j in range(k)])
        inertia = float(((points - centers[labels]) ** 2).sum())
        prev = history[-1] if history else None
        history.append(inertia)
        if prev is not None and prev - inertia <= tol * prev:
            break
    return labels, centers, history


def canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Relabel clusters in order of first appearance."""
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(order.size, dtype=np.int64)
    remap[order] = np.arange(order.size)
    return remap[np.unique(labels, return_inverse=True)[1]]


def kmeans(
    points: np.ndarray,
    k: int,
    restarts: int = 10,
    rng_seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ClusteringResult:
    """k-means++ seeding plus Lloyd iterations; the lowest inertia restart wins."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if restarts < 1:
        raise ValueError("restarts must be positive")
    best = None
    for i, seq in enumerate(np.random.SeedSequence(rng_seed).spawn(restarts)):
        rng = np.random.default_rng(seq)
        labels, _, history = _lloyd(points, _kmeans_pp(points, k, rng), max_iter, tol)
        if best is None or history[-1] < best[0]:
            best = (history[-1], i, labels, history)
    inertia, _, labels, history = best
    return ClusteringResult(canonical_labels(labels), k, inertia, "points", None, history)


def spectral_cluster(
    deg: np.ndarray,
    a_hat: np.ndarray,
    k: int,
    rng_seed: int = 0,
    mode: str = "original",
    restarts: int = 10,
) -> ClusteringResult:
    """Cluster rows of the ``k`` smallest Laplacian eigenvectors with k-means."""
    emb = smallest_k_eigvecs(build_laplacian(deg, a_hat, mode), k)
    res = kmeans(emb.matrix, k, restarts=restarts, rng_seed=rng_seed)
    res.embedding_ref = "spectral"
    res.embedding = emb
    return res
