"""Quaternion matrix algebra used by the encoder layers.

Quaternion-valued matrices are stored as four real blocks (r, x, y, z) of
equal shape. The Hamilton product of a feature matrix with a weight matrix is
expressed through ordinary real matrix products, either blockwise or through
the equivalent ``4*d_in x 4*d_out`` real matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PARTS = ("r", "x", "y", "z")


@dataclass(frozen=True)
class ScalarQuaternion:
    r: float
    x: float
    y: float
    z: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.r, self.x, self.y, self.z)

    def norm(self) -> float:
        return float(np.sqrt(self.r**2 + self.x**2 + self.y**2 + self.z**2))


def hamilton_scalar(q1: ScalarQuaternion, q2: ScalarQuaternion) -> ScalarQuaternion:
    r1, x1, y1, z1 = q1.as_tuple()
    r2, x2, y2, z2 = q2.as_tuple()
    return ScalarQuaternion(
        r1 * r2 - x1 * x2 - y1 * y2 - z1 * z2,
        r1 * x2 + x1 * r2 + y1 * z2 - z1 * y2,
        r1 * y2 - x1 * z2 + y1 * r2 + z1 * x2,
        r1 * z2 + x1 * y2 - y1 * x2 + z1 * r2,
    )


def _check_blocks(blocks, what):
    shapes = {np.shape(b) for b in blocks}
    if len(shapes) != 1:
        raise ValueError(f"{what}: blocks must share one shape, got {sorted(shapes)}")
    if len(next(iter(shapes))) != 2:
        raise ValueError(f"{what}: blocks must be 2-D")


@dataclass(frozen=True)
class QuaternionMatrix:
    """An ``n x d`` quaternion matrix held as four real ``n x d`` blocks."""

    r: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        _check_blocks(self.blocks(), "QuaternionMatrix")

    @property
    def shape(self) -> tuple[int, int]:
        return self.r.shape

    def blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (self.r, self.x, self.y, self.z)

    def concat(self) -> np.ndarray:
        """Real ``n x 4d`` row layout ``[r | x | y | z]``."""
        return np.hstack(self.blocks())

    @classmethod
    def from_concat(cls, m: np.ndarray) -> "QuaternionMatrix":
        d = m.shape[1] // 4
        if 4 * d != m.shape[1]:
            raise ValueError(f"column count {m.shape[1]} is not divisible by 4")
        return cls(*(m[:, i * d:(i + 1) * d] for i in range(4)))

    def map(self, fn) -> "QuaternionMatrix":
        return QuaternionMatrix(*(fn(b) for b in self.blocks()))


@dataclass(frozen=True)
class QuaternionWeights:
    """Quaternion weight matrix ``d_in x d_out``; stores ``4*d_in*d_out`` scalars."""

    wr: np.ndarray
    wx: np.ndarray
    wy: np.ndarray
    wz: np.ndarray

    def __post_init__(self):
        _check_blocks(self.blocks(), "QuaternionWeights")

    @property
    def shape(self) -> tuple[int, int]:
        return self.wr.shape

    def blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (self.wr, self.wx, self.wy, self.wz)

    @property
    def n_params(self) -> int:
        return 4 * self.wr.size


def equivalent_real_matrix(w: QuaternionWeights) -> np.ndarray:
    """Materialize the ``4*d_in x 4*d_out`` real block matrix of ``w``.

    Row-block order follows the feature parts ``[f_r | f_x | f_y | f_z]`` so that
    ``f.concat() @ equivalent_real_matrix(w)`` equals ``hamilton_matmul(f, w).concat()``.
    """
    wr, wx, wy, wz = w.blocks()
    layout = (
        ((1, wr), (1, wx), (1, wy), (1, wz)),
        ((-1, wx), (1, wr), (-1, wz), (1, wy)),
        ((-1, wy), (1, wz), (1, wr), (-1, wx)),
        ((-1, wz), (-1, wy), (1, wx), (1, wr)),
    )
    din, dout = w.shape
    out = np.empty((4 * din, 4 * dout), dtype=np.result_type(*w.blocks()))
    for i, row in enumerate(layout):
        for j, (sign, block) in enumerate(row):
            dst = out[i * din:(i + 1) * din, j * dout:(j + 1) * dout]
            if sign > 0:
                dst[...] = block
            else:
                np.negative(block, out=dst)
    return out


def hamilton_matmul(f: QuaternionMatrix, w: QuaternionWeights) -> QuaternionMatrix:
    if f.shape[1] != w.shape[0]:
        raise ValueError(
            f"shape mismatch: features {f.shape} cannot multiply weights {w.shape}"
        )
    out = f.concat() @ equivalent_real_matrix(w)
    return QuaternionMatrix.from_concat(out)


def hamilton_matmul_backward(
    f: QuaternionMatrix, w: QuaternionWeights, grad_out: QuaternionMatrix
) -> tuple[QuaternionMatrix, QuaternionWeights]:
    """Gradients of a scalar loss through ``hamilton_matmul`` wrt ``f`` and ``w``.

    The input gradient reuses the transposed block matrix; the weight gradient
    folds the 16 block products ``f_i^T g_j`` back onto the four shared blocks.
    """
    m = equivalent_real_matrix(w)
    g = grad_out.concat()
    grad_f = QuaternionMatrix.from_concat(g @ m.T)
    din, dout = w.shape
    gm = f.concat().T @ g
    blk = [[gm[i * din:(i + 1) * din, j * dout:(j + 1) * dout] for j in range(4)]
           for i in range(4)]
    grad_w = QuaternionWeights(
        blk[0][0] + blk[1][1] + blk[2][2] + blk[3][3],
        blk[0][1] - blk[1][0] - blk[2][3] + blk[3][2],
        blk[0][2] + blk[1][3] - blk[2][0] - blk[3][1],
        blk[0][3] - blk[1][2] + blk[2][1] - blk[3][0],
    )
    return grad_f, grad_w


def default_sigma(d_in: int, d_out: int) -> float:
    return 1.0 / np.sqrt(2.0 * (d_in + d_out))


def quaternion_init(
    d_in: int, d_out: int, sigma: float | None = None, rng_seed: int = 0
) -> QuaternionWeights:
    """Sample weights in polar form ``|w| (cos t + u sin t)``.

    ``|w|`` is the norm of four independent ``N(0, sigma^2)`` draws (a scaled
    Chi(4) magnitude), ``u`` a uniformly random unit pure quaternion and ``t``
    uniform on ``[-pi, pi]``.
    """
    if sigma is None:
        sigma = default_sigma(d_in, d_out)
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    rng = np.random.default_rng(rng_seed)
    shape = (d_in, d_out)
    magnitude = np.linalg.norm(rng.normal(0.0, sigma, size=(4,) + shape), axis=0)
    axis = rng.standard_normal(size=(3,) + shape)
    axis /= np.linalg.norm(axis, axis=0)
    theta = rng.uniform(-np.pi, np.pi, size=shape)
    s = magnitude * np.sin(theta)
    return QuaternionWeights(
        magnitude * np.cos(theta), s * axis[0], s * axis[1], s * axis[2]
    )


def fuse(h: QuaternionMatrix) -> np.ndarray:
    return (h.r + h.x + h.y + h.z) / 4.0
