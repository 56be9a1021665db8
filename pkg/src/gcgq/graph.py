"""Attributed graphs: loading, saving, normalization and synthetic fixtures."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class DataError(ValueError):
    """Malformed or inconsistent dataset input."""


@dataclass(frozen=True)
class AttributedGraph:
    adjacency: sp.csr_matrix
    attributes: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        a = self.adjacency
        n = a.shape[0]
        if a.shape != (n, n):
            raise DataError(f"adjacency must be square, got {a.shape}")
        if (a != a.T).nnz:
            raise DataError("adjacency must be symmetric")
        if a.diagonal().any():
            raise DataError("adjacency must have a zero diagonal")
        if a.nnz and not np.all(a.data == 1):
            raise DataError("adjacency must be binary")
        if self.attributes.ndim != 2 or self.attributes.shape[0] != n:
            raise DataError(
                f"attributes must have {n} rows, got shape {self.attributes.shape}"
            )
        if self.labels is not None:
            if self.labels.shape != (n,):
                raise DataError(f"labels must have length {n}, got {self.labels.shape}")
            if self.labels.size and self.labels.min() < 0:
                raise DataError("labels must be nonnegative")

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def d(self) -> int:
        return self.attributes.shape[1]

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz // 2

    @property
    def k_true(self) -> int | None:
        if self.labels is None:
            return None
        return int(np.unique(self.labels).size)


def adjacency_from_edges(n: int, edges) -> sp.csr_matrix:
    """Symmetric 0/1 adjacency from an edge list; self-loops and duplicates dropped."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    edges = edges[edges[:, 0] != edges[:, 1]]
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    a = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n)).tocsr()
    a.data[:] = 1.0
    a.sort_indices()
    return a


def _read_edges(path: Path) -> np.ndarray:
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected two node ids, got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
            if u < 0 or v < 0:
                raise DataError(f"{path}:{lineno}: negative node id")
            edges.append((u, v))
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def _read_features_csv(path: Path) -> np.ndarray:
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(v) for v in line.split(",")]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric attribute value") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(f"{path}:{lineno}: expected {width} values, got {len(row)}")
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no attribute rows")
    x = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DataError(f"{path}: non-finite attribute value")
    return x


def _read_features_bin(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < 16:
        raise DataError(f"{path}: truncated header")
    n, d = struct.unpack("<QQ", raw[:16])
    if len(raw) != 16 + 8 * n * d:
        raise DataError(f"{path}: expected {n}x{d} float64 payload, got {len(raw) - 16} bytes")
    return np.frombuffer(raw, dtype="<f8", offset=16).reshape(n, d).astype(np.float64)


def _read_labels(path: Path) -> np.ndarray:
    labels = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                v = int(line)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer label {line!r}") from None
            if v < 0:
                raise DataError(f"{path}:{lineno}: negative label")
            labels.append(v)
    return np.array(labels, dtype=np.int64)


def load_graph(path) -> AttributedGraph:
    """Load a dataset directory (``graph.edges``, ``features.csv|bin``, ``labels.txt``)."""
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"{root}: not a dataset directory")
    edge_file = root / "graph.edges"
    if not edge_file.exists():
        raise DataError(f"{edge_file}: missing")
    if (root / "features.bin").exists():
        x = _read_features_bin(root / "features.bin")
    elif (root / "features.csv").exists():
        x = _read_features_csv(root / "features.csv")
    else:
        raise DataError(f"{root}: missing features.csv or features.bin")
    n = x.shape[0]
    edges = _read_edges(edge_file)
    if edges.size and edges.max() >= n:
        bad = int(np.argmax(edges.max(axis=1) >= n)) + 1
        raise DataError(f"{edge_file}: edge #{bad} references node >= n={n}")
    labels = None
    if (root / "labels.txt").exists():
        labels = _read_labels(root / "labels.txt")
        if labels.size != n:
            raise DataError(f"{root / 'labels.txt'}: {labels.size} labels for {n} nodes")
    return AttributedGraph(adjacency_from_edges(n, edges), x, labels)


def save_graph(g: AttributedGraph, path, binary: bool = False) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    upper = sp.triu(g.adjacency, k=1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    with open(root / "graph.edges", "w", encoding="utf-8", newline="\n") as fh:
        for u, v in zip(upper.row[order], upper.col[order]):
            fh.write(f"{u} {v}\n")
    for stale in ("features.csv", "features.bin"):
        (root / stale).unlink(missing_ok=True)
    if binary:
        with open(root / "features.bin", "wb") as fh:
            fh.write(struct.pack("<QQ", g.n, g.d))
            fh.write(np.ascontiguousarray(g.attributes, dtype="<f8").tobytes())
    else:
        with open(root / "features.csv", "w", encoding="utf-8", newline="\n") as fh:
            for row in g.attributes:
                # repr round-trips float64 exactly
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    labels_file = root / "labels.txt"
    if g.labels is not None:
        with open(labels_file, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(f"{int(v)}\n" for v in g.labels)
    else:
        labels_file.unlink(missing_ok=True)


def degree_matrix(g: AttributedGraph) -> np.ndarray:
    """Node degrees of ``A`` (no self-loops), as the diagonal vector."""
    return np.asarray(g.adjacency.sum(axis=1), dtype=np.float64).ravel()


def normalize_adjacency(g: AttributedGraph, degree_mode: str = "selfloop") -> np.ndarray:
    """Dense ``D^-1/2 (I + A) D^-1/2``.

    ``selfloop`` uses degrees of ``I + A``; ``raw`` uses degrees of ``A`` and
    falls back to the self-loop degree 1 for isolated nodes.
    """
    if degree_mode not in ("selfloop", "raw"):
        raise ValueError(f"unknown degree_mode {degree_mode!r}")
    loops = g.adjacency.toarray() + np.eye(g.n)
    deg = degree_matrix(g)
    if degree_mode == "selfloop":
        deg = deg + 1.0
    else:
        deg = np.where(deg > 0, deg, 1.0)
    inv_sqrt = 1.0 / np.sqrt(deg)
    return loops * inv_sqrt[:, None] * inv_sqrt[None, :]


def generate_planted_partition(
    k: int,
    nodes_per_cluster: int,
    p_in: float,
    p_out: float,
    attr_dim: int = 16,
    attr_shift: float = 2.0,
    rng_seed: int = 0,
) -> AttributedGraph:
    """Planted-partition graph with Gaussian attributes.

    Cluster ``c`` has attribute mean ``attr_shift * e_(c mod attr_dim)`` plus
    unit Gaussian noise; labels are the block ids.
    """
    if not (0.0 <= p_out < p_in <= 1.0):
        raise ValueError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if k < 1 or nodes_per_cluster < 1 or attr_dim < 1:
        raise ValueError("k, nodes_per_cluster and attr_dim must be positive")
    rng = np.random.default_rng(rng_seed)
    n = k * nodes_per_cluster
    labels = np.repeat(np.arange(k), nodes_per_cluster)
    prob = np.where(labels[:, None] == labels[None, :], p_in, p_out)
    draws = rng.random((n, n))
    upper = np.triu(draws < prob, k=1)
    rows, cols = np.nonzero(upper)
    adjacency = adjacency_from_edges(n, np.column_stack([rows, cols]))
    means = np.zeros((k, attr_dim))
    means[np.arange(k), np.arange(k) % attr_dim] = attr_shift
    attributes = means[labels] + rng.standard_normal((n, attr_dim))
    return AttributedGraph(adjacency, attributes, labels)
