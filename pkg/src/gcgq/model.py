"""Four-view projection, quaternion graph encoders and the inner-product decoder.

Every variant runs on the concatenated real layout ``[r | x | y | z]`` of width
``4*d`` per stage:

* ``full``     four affine views, quaternion layers, averaging fusion
* ``no_fvp``   identical math; the view projections are frozen
* ``no_qge``   quaternion layers replaced by unconstrained real ``4d x 4d'`` maps
* ``baseline`` one real affine of width ``4*fvp_dim`` and plain GCN layers, no fusion
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .quaternion import (
    PARTS,
    QuaternionMatrix,
    QuaternionWeights,
    equivalent_real_matrix,
    hamilton_matmul,
    quaternion_init,
)

VARIANTS = ("full", "baseline", "no_fvp", "no_qge")
DECODER_EPS = 1e-10
CHECKPOINT_MAGIC = b"GCGQ"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ArchitectureSpec:
    fvp_dim: int = 512
    qge_dims: tuple[int, ...] = (256, 128)
    activation: str = "relu"
    variant: str = "full"
    decoder: str = "sigmoid_inner_product"

    def __post_init__(self):
        object.__setattr__(self, "qge_dims", tuple(int(d) for d in self.qge_dims))
        if self.fvp_dim <= 0:
            raise ValueError("fvp_dim must be positive")
        if not self.qge_dims:
            raise ValueError("qge_dims must name at least one encoder layer")
        if any(d <= 0 for d in self.qge_dims):
            raise ValueError("qge_dims must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if self.decoder != "sigmoid_inner_product":
            raise ValueError(f"unsupported decoder {self.decoder!r}")

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.fvp_dim,) + self.qge_dims

    @property
    def quaternion_layers(self) -> bool:
        return self.variant in ("full", "no_fvp")

    @property
    def embedding_dim(self) -> int:
        last = self.qge_dims[-1]
        return 4 * last if self.variant == "baseline" else last


@dataclass
class GcgqModel:
    """All learnable parameters, keyed by name in declaration order."""

    arch: ArchitectureSpec
    input_dim: int
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def layer_names(self, l: int) -> list[str]:
        if self.arch.quaternion_layers:
            return [f"qge.{l}.w{p}" for p in PARTS]
        return [f"gcn.{l}.w"]

    def projection_names(self) -> list[str]:
        if self.arch.variant == "baseline":
            return ["proj.w", "proj.b"]
        return [f"fvp.{kind}{p}" for p in PARTS for kind in ("w", "b")]

    def trainable_names(self) -> list[str]:
        frozen = set(self.projection_names()) if self.arch.variant == "no_fvp" else set()
        return [k for k in self.params if k not in frozen]

    @property
    def fvp(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        """Per-part ``(weight, bias)`` views of the projection."""
        if self.arch.variant == "baseline":
            w, b = self.params["proj.w"], self.params["proj.b"]
            dh = self.arch.fvp_dim
            return {p: (w[:, i * dh:(i + 1) * dh], b[i * dh:(i + 1) * dh])
                    for i, p in enumerate(PARTS)}
        return {p: (self.params[f"fvp.w{p}"], self.params[f"fvp.b{p}"]) for p in PARTS}

    @property
    def qge(self) -> list[QuaternionWeights]:
        if not self.arch.quaternion_layers:
            raise AttributeError(f"variant {self.arch.variant!r} has no quaternion layers")
        return [QuaternionWeights(*(self.params[n] for n in self.layer_names(l)))
                for l in range(len(self.arch.qge_dims))]

    def layer_matrix(self, l: int) -> np.ndarray:
        """Real ``4*d_in x 4*d_out`` matrix applied by encoder layer ``l``."""
        if self.arch.quaternion_layers:
            return equivalent_real_matrix(self.qge[l])
        return self.params[f"gcn.{l}.w"]

    def projection(self) -> tuple[np.ndarray, np.ndarray]:
        """Concatenated projection weight ``d x 4*fvp_dim`` and bias."""
        if self.arch.variant == "baseline":
            return self.params["proj.w"], self.params["proj.b"]
        w = np.hstack([self.params[f"fvp.w{p}"] for p in PARTS])
        b = np.concatenate([self.params[f"fvp.b{p}"] for p in PARTS])
        return w, b

    def copy(self) -> "GcgqModel":
        return GcgqModel(self.arch, self.input_dim,
                         {k: v.copy() for k, v in self.params.items()})


def _glorot(rng, d_in, d_out):
    limit = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-limit, limit, size=(d_in, d_out))


def init_model(
    arch: ArchitectureSpec, input_dim: int, seed: int = 0, sigma: float | None = None
) -> GcgqModel:
    """Initialize parameters; all variants draw from the same per-block streams.

    The four projection weights use Glorot-uniform draws (shared by ``baseline``,
    whose single projection is their concatenation), biases start at zero, and
    quaternion layers use :func:`quaternion_init`.
    """
    if input_dim <= 0:
        raise ValueError("input_dim must be positive")
    streams = np.random.SeedSequence(seed).spawn(1 + len(arch.qge_dims))
    rng = np.random.default_rng(streams[0])
    dh = arch.fvp_dim
    views = {p: _glorot(rng, input_dim, dh) for p in PARTS}
    params: dict[str, np.ndarray] = {}
    if arch.variant == "baseline":
        params["proj.w"] = np.hstack([views[p] for p in PARTS])
        params["proj.b"] = np.zeros(4 * dh)
    else:
        for p in PARTS:
            params[f"fvp.w{p}"] = views[p]
            params[f"fvp.b{p}"] = np.zeros(dh)
    widths = arch.widths
    for l, (d_in, d_out) in enumerate(zip(widths[:-1], widths[1:])):
        layer_seed = int(streams[l + 1].generate_state(1)[0])
        if arch.quaternion_layers:
            w = quaternion_init(d_in, d_out, sigma, layer_seed)
            for p, block in zip(PARTS, w.blocks()):
                params[f"qge.{l}.w{p}"] = block
        else:
            params[f"gcn.{l}.w"] = _glorot(np.random.default_rng(layer_seed), 4 * d_in, 4 * d_out)
    return GcgqModel(arch, input_dim, params)


def param_shapes(arch: ArchitectureSpec, input_dim: int) -> dict[str, tuple[int, ...]]:
    dh = arch.fvp_dim
    shapes: dict[str, tuple[int, ...]] = {}
    if arch.variant == "baseline":
        shapes["proj.w"] = (input_dim, 4 * dh)
        shapes["proj.b"] = (4 * dh,)
    else:
        for p in PARTS:
            shapes[f"fvp.w{p}"] = (input_dim, dh)
            shapes[f"fvp.b{p}"] = (dh,)
    widths = arch.widths
    for l, (d_in, d_out) in enumerate(zip(widths[:-1], widths[1:])):
        if arch.quaternion_layers:
            for p in PARTS:
                shapes[f"qge.{l}.w{p}"] = (d_in, d_out)
        else:
            shapes[f"gcn.{l}.w"] = (4 * d_in, 4 * d_out)
    return shapes


def parameter_count(model: GcgqModel, portion: str = "all") -> int:
    """Scalar parameter count: ``all``, ``encoder`` (graph layers) or ``projection``."""
    if portion not in ("all", "encoder", "projection"):
        raise ValueError(f"unknown portion {portion!r}")
    proj = set(model.projection_names())
    total = 0
    for name, v in model.params.items():
        if portion == "all" or (portion == "projection") == (name in proj):
            total += v.size
    return total


def fvp_forward(model: GcgqModel, x: np.ndarray) -> QuaternionMatrix:
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ValueError(
            f"attribute width {x.shape[-1]} does not match model input {model.input_dim}"
        )
    w, b = model.projection()
    return QuaternionMatrix.from_concat(x @ w + b)


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def qge_layer_forward(
    a_norm: np.ndarray, h: QuaternionMatrix, w: QuaternionWeights, activation: str = "relu"
) -> QuaternionMatrix:
    """One encoder: Hamilton product, then aggregation by ``a_norm``, then activation."""
    if activation != "relu":
        raise ValueError(f"unsupported activation {activation!r}")
    if a_norm.shape != (h.shape[0], h.shape[0]):
        raise ValueError(f"adjacency {a_norm.shape} does not match {h.shape[0]} nodes")
    p = hamilton_matmul(h, w)
    return p.map(lambda b: relu(a_norm @ b))


@dataclass
class ForwardTrace:
    x: np.ndarray
    a_norm: np.ndarray
    projected: np.ndarray  # n x 4*fvp_dim, [r|x|y|z]
    layer_inputs: list[np.ndarray]
    pre_activations: list[np.ndarray]
    post_activations: list[np.ndarray]
    layer_matrices: list[np.ndarray]
    gamma: np.ndarray
    logits: np.ndarray
    probs: np.ndarray  # unclamped logistic
    a_hat: np.ndarray

    @property
    def views(self) -> QuaternionMatrix:
        return QuaternionMatrix.from_concat(self.projected)


def decode(gamma: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    logits = gamma @ gamma.T
    probs = expit(logits)
    return logits, probs, np.clip(probs, DECODER_EPS, 1.0 - DECODER_EPS)


def fuse_concat(h: np.ndarray) -> np.ndarray:
    d = h.shape[1] // 4
    return (h[:, :d] + h[:, d:2 * d] + h[:, 2 * d:3 * d] + h[:, 3 * d:]) / 4.0


def forward(model: GcgqModel, x: np.ndarray, a_norm: np.ndarray) -> ForwardTrace:
    """Run projection, encoders, fusion and decoder on attributes ``x``."""
    n = x.shape[0]
    if a_norm.shape != (n, n):
        raise ValueError(f"adjacency {a_norm.shape} does not match {n} nodes")
    h = fvp_forward(model, x).concat()
    projected = h
    inputs, pres, posts, mats = [], [], [], []
    for l in range(len(model.arch.qge_dims)):
        m = model.layer_matrix(l)
        inputs.append(h)
        z = a_norm @ (h @ m)
        h = relu(z)
        pres.append(z)
        posts.append(h)
        mats.append(m)
    gamma = h if model.arch.variant == "baseline" else fuse_concat(h)
    logits, probs, a_hat = decode(gamma)
    return ForwardTrace(x, a_norm, projected, inputs, pres, posts, mats,
                        gamma, logits, probs, a_hat)


def forward_graph(model: GcgqModel, g, a_norm: np.ndarray) -> ForwardTrace:
    if g.d != model.input_dim:
        raise ValueError(f"graph has {g.d} attributes, model expects {model.input_dim}")
    return forward(model, g.attributes, a_norm)


# -- checkpoints -----------------------------------------------------------


class CheckpointError(ValueError):
    pass


def save_checkpoint(model: GcgqModel, path, meta: dict | None = None) -> None:
    """Write ``GCGQ`` magic, version, JSON header, then shape-prefixed float64 blocks."""
    header = {
        "arch": {**asdict(model.arch), "qge_dims": list(model.arch.qge_dims)},
        "input_dim": model.input_dim,
        "meta": meta or {},
    }
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    buf.write(struct.pack("<I", len(model.params)))
    for name, v in model.params.items():
        key = name.encode("utf-8")
        buf.write(struct.pack("<I", len(key)))
        buf.write(key)
        buf.write(struct.pack("<I", v.ndim))
        buf.write(struct.pack(f"<{v.ndim}Q", *v.shape))
        buf.write(np.ascontiguousarray(v, dtype="<f8").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path) -> tuple[GcgqModel, dict]:
    raw = Path(path).read_bytes()
    view = memoryview(raw)
    pos = 0

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(raw):
            raise CheckpointError(f"{path}: truncated checkpoint")
        out = struct.unpack_from(fmt, raw, pos)
        pos += size
        return out

    if raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {raw[:4]!r}")
    pos = 4
    (version,) = take("<I")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (hlen,) = take("<I")
    try:
        header = json.loads(bytes(view[pos:pos + hlen]).decode("utf-8"))
        pos += hlen
        arch = ArchitectureSpec(**header["arch"])
        input_dim = int(header["input_dim"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: malformed header ({exc})") from None
    (count,) = take("<I")
    params = {}
    for _ in range(count):
        (klen,) = take("<I")
        name = bytes(view[pos:pos + klen]).decode("utf-8")
        pos += klen
        (ndim,) = take("<I")
        shape = take(f"<{ndim}Q")
        size = int(np.prod(shape)) * 8
        if pos + size > len(raw):
            raise CheckpointError(f"{path}: truncated block {name!r}")
        params[name] = np.frombuffer(raw, dtype="<f8", count=size // 8, offset=pos) \
            .reshape(shape).astype(np.float64)
        pos += size
    if pos != len(raw):
        raise CheckpointError(f"{path}: trailing bytes after parameter blocks")
    model = GcgqModel(arch, input_dim, params)
    expected = param_shapes(arch, input_dim)
    if list(expected) != list(params) or any(expected[k] != params[k].shape for k in params):
        raise CheckpointError(f"{path}: parameter blocks do not match the architecture")
    return model, header.get("meta", {})
