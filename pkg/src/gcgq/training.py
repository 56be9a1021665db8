"""Joint reconstruction / spectral loss, exact gradients, Adam and the training loop."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .clustering import NumericalError, spectral_cluster
from .graph import AttributedGraph, degree_matrix, normalize_adjacency
from .metrics import external_metrics
from .model import (
    DECODER_EPS,
    ArchitectureSpec,
    ForwardTrace,
    GcgqModel,
    forward,
    init_model,
)
from .quaternion import PARTS


@dataclass(frozen=True)
class LossBreakdown:
    kl: float
    reg: float
    sc: float
    total: float
    alpha: float
    beta: float

    @classmethod
    def combine(cls, kl: float, reg: float, sc: float, alpha: float, beta: float):
        return cls(kl, reg, sc, kl + alpha * reg + beta * sc, alpha, beta)


@dataclass(frozen=True)
class TrainConfig:
    warmup_epochs: int = 10
    warmup_lr: float = 1e-4
    warmup_beta: float = 1e-4
    epochs: int = 50
    iters_per_epoch: int = 4
    lr: float = 1e-4
    alpha: float = 1e-4
    beta: float = 2.0 ** -10
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    init_sigma: float | None = None
    degree_mode: str = "selfloop"
    laplacian_mode: str = "original"
    n_clusters: int | None = None
    kmeans_restarts: int = 10

    def __post_init__(self):
        for name in ("warmup_epochs", "epochs"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.iters_per_epoch < 1:
            raise ValueError("iters_per_epoch must be positive")
        if not (self.lr > 0 and self.warmup_lr > 0):
            raise ValueError("learning rates must be positive")
        if self.alpha < 0 or self.beta < 0 or self.warmup_beta < 0:
            raise ValueError("alpha and beta must be nonnegative")
        if self.n_clusters is not None and self.n_clusters < 1:
            raise ValueError("n_clusters must be positive")

    @property
    def cluster_seed(self) -> int:
        """k-means seed used for every evaluation of this run."""
        return int(np.random.SeedSequence([self.seed, 1]).generate_state(1)[0])

    @property
    def init_seed(self) -> int:
        return int(np.random.SeedSequence([self.seed, 0]).generate_state(1)[0])


# -- losses ----------------------------------------------------------------


def loss_kl(a_norm: np.ndarray, a_hat: np.ndarray) -> float:
    """``(1/n^2) sum a_norm * log(1/a_hat)``; zero entries of ``a_norm`` contribute nothing."""
    if a_norm.shape != a_hat.shape or a_norm.ndim != 2:
        raise ValueError(f"shape mismatch {a_norm.shape} vs {a_hat.shape}")
    mask = a_norm != 0
    if np.any(a_hat[mask] <= 0):
        raise ValueError("reconstruction has nonpositive entries where the target is nonzero")
    n = a_norm.shape[0]
    return float((a_norm[mask] * -np.log(a_hat[mask])).sum() / (n * n))


def loss_sc(gamma: np.ndarray, deg: np.ndarray, a_hat: np.ndarray) -> float:
    """``Tr(gamma^T (D - a_hat) gamma)`` without forming ``D - a_hat``."""
    deg = np.asarray(deg).ravel()
    if a_hat.shape != (gamma.shape[0],) * 2 or deg.shape != (gamma.shape[0],):
        raise ValueError("gamma, degrees and a_hat disagree on node count")
    return float(deg @ np.einsum("ij,ij->i", gamma, gamma)
                 - np.einsum("ij,ij->", a_hat, gamma @ gamma.T))


def loss_reg(model: GcgqModel) -> float:
    return float(sum(np.abs(model.params[k]).sum() for k in model.trainable_names()))


def loss_breakdown(trace: ForwardTrace, model: GcgqModel, deg, alpha, beta) -> LossBreakdown:
    kl = loss_kl(trace.a_norm, trace.a_hat)
    sc = float(deg @ np.einsum("ij,ij->i", trace.gamma, trace.gamma)
               - np.einsum("ij,ij->", trace.a_hat, trace.logits))
    return LossBreakdown.combine(kl, loss_reg(model), sc, alpha, beta)


# -- gradients -------------------------------------------------------------


def _fold_quaternion(gm: np.ndarray, d_in: int, d_out: int) -> list[np.ndarray]:
    """Collapse a ``4d_in x 4d_out`` block gradient onto the four shared blocks."""
    b = [[gm[i * d_in:(i + 1) * d_in, j * d_out:(j + 1) * d_out] for j in range(4)]
         for i in range(4)]
    return [
        b[0][0] + b[1][1] + b[2][2] + b[3][3],
        b[0][1] - b[1][0] - b[2][3] + b[3][2],
        b[0][2] + b[1][3] - b[2][0] - b[3][1],
        b[0][3] - b[1][2] + b[2][1] - b[3][0],
    ]


def backward(
    trace: ForwardTrace, model: GcgqModel, deg: np.ndarray, alpha: float, beta: float
) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of ``kl + alpha*reg + beta*sc`` for every trainable parameter."""
    n = trace.a_hat.shape[0]
    deg = np.asarray(deg, dtype=np.float64).ravel()
    if deg.shape != (n,) or trace.a_norm.shape != (n, n):
        raise ValueError("trace, degrees and adjacency disagree on node count")
    gamma, a_hat, probs = trace.gamma, trace.a_hat, trace.probs

    # d/dA_hat of the KL term plus the sc term's -sum(A_hat * S)
    with np.errstate(divide="ignore", invalid="ignore"):
        g_ahat = np.where(trace.a_norm != 0, -trace.a_norm / (n * n * a_hat), 0.0)
    g_ahat -= beta * trace.logits
    inside = (probs > DECODER_EPS) & (probs < 1.0 - DECODER_EPS)
    g_logits = g_ahat * probs * (1.0 - probs) * inside - beta * a_hat
    g_gamma = (g_logits + g_logits.T) @ gamma + 2.0 * beta * deg[:, None] * gamma

    if model.arch.variant == "baseline":
        g_h = g_gamma
    else:
        g_h = np.tile(g_gamma / 4.0, (1, 4))

    trainable = set(model.trainable_names())
    grads: dict[str, np.ndarray] = {}
    widths = model.arch.widths
    for l in reversed(range(len(model.arch.qge_dims))):
        g_z = g_h * (trace.pre_activations[l] > 0)
        g_p = trace.a_norm @ g_z  # a_norm is symmetric
        h_in = trace.layer_inputs[l]
        g_m = h_in.T @ g_p
        if model.arch.quaternion_layers:
            for p, g in zip(PARTS, _fold_quaternion(g_m, widths[l], widths[l + 1])):
                grads[f"qge.{l}.w{p}"] = g
        else:
            grads[f"gcn.{l}.w"] = g_m
        if l > 0 or model.arch.variant != "no_fvp":
            g_h = g_p @ trace.layer_matrices[l].T

    if model.arch.variant != "no_fvp":
        g_w = trace.x.T @ g_h
        g_b = g_h.sum(axis=0)
        if model.arch.variant == "baseline":
            grads["proj.w"], grads["proj.b"] = g_w, g_b
        else:
            dh = model.arch.fvp_dim
            for i, p in enumerate(PARTS):
                grads[f"fvp.w{p}"] = g_w[:, i * dh:(i + 1) * dh]
                grads[f"fvp.b{p}"] = g_b[i * dh:(i + 1) * dh]

    if alpha:
        for name in grads:
            grads[name] = grads[name] + alpha * np.sign(model.params[name])
    return {k: grads[k] for k in model.params if k in trainable}


# -- optimizer -------------------------------------------------------------


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    """In-place bias-corrected Adam update of ``params`` for the keys in ``grads``."""
    state.step += 1
    bc1 = 1.0 - beta1 ** state.step
    bc2 = 1.0 - beta2 ** state.step
    for k, g in grads.items():
        if params[k].shape != g.shape:
            raise ValueError(f"gradient for {k} has shape {g.shape}, expected {params[k].shape}")
        if k not in state.m:
            state.m[k] = np.zeros_like(g)
            state.v[k] = np.zeros_like(g)
        m, v = state.m[k], state.v[k]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        denom = np.sqrt(v / bc2)
        denom += eps
        params[k] -= (lr / bc1) * m / denom
    return state


# -- training loop ---------------------------------------------------------


@dataclass
class EpochRecord:
    epoch: int
    loss: LossBreakdown
    acc: float | None
    nmi: float | None
    ari: float | None
    inertia: float
    wall_time: float

    def to_dict(self) -> dict:
        out = asdict(self)
        out["loss"] = asdict(self.loss)
        return out


@dataclass
class TrainLog:
    config: TrainConfig
    arch: ArchitectureSpec
    warmup: list[LossBreakdown] = field(default_factory=list)
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None
    best_model: GcgqModel | None = field(default=None, repr=False)
    best_assignment: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self, timing: bool = True) -> dict:
        records = [r.to_dict() for r in self.records]
        if not timing:
            for r in records:
                r.pop("wall_time")
        return {
            "config": asdict(self.config),
            "arch": {**asdict(self.arch), "qge_dims": list(self.arch.qge_dims)},
            "warmup": [asdict(w) for w in self.warmup],
            "records": records,
            "best_epoch": self.best_epoch,
        }

    @property
    def best(self) -> EpochRecord | None:
        if self.best_epoch is None:
            return None
        return self.records[self.best_epoch]


def _check_finite(trace: ForwardTrace, grads=None, loss=None):
    stages = [("projection", trace.projected)]
    for l, h in enumerate(trace.post_activations):
        stages.append((f"encoder layer {l}", h))
    stages += [("fused embedding", trace.gamma), ("decoder logits", trace.logits),
               ("reconstruction", trace.a_hat)]
    for name, arr in stages:
        if not np.all(np.isfinite(arr)):
            raise NumericalError(f"non-finite values first appear in the {name}")
    if loss is not None and not np.isfinite(loss.total):
        raise NumericalError(f"non-finite loss (kl={loss.kl}, reg={loss.reg}, sc={loss.sc})")
    if grads is not None:
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NumericalError(f"non-finite gradient for parameter {name}")


def train(
    g: AttributedGraph,
    arch: ArchitectureSpec,
    config: TrainConfig,
    model: GcgqModel | None = None,
    a_norm: np.ndarray | None = None,
) -> tuple[GcgqModel, TrainLog]:
    """Warm-up, then ``epochs`` rounds of ``iters_per_epoch`` updates plus one clustering.

    The best epoch maximizes ACC when labels exist, otherwise minimizes the total
    loss; its parameters and assignment are kept on the log.
    """
    k = config.n_clusters or g.k_true
    if config.epochs > 0 and k is None:
        raise ValueError("number of clusters is unknown: graph has no labels and n_clusters unset")
    if model is None:
        model = init_model(arch, g.d, seed=config.init_seed, sigma=config.init_sigma)
    if a_norm is None:
        a_norm = normalize_adjacency(g, config.degree_mode)
    deg = degree_matrix(g)
    x = g.attributes
    log = TrainLog(config, arch)

    def step(trace, state, lr, beta):
        loss = loss_breakdown(trace, model, deg, config.alpha, beta)
        grads = backward(trace, model, deg, config.alpha, beta)
        _check_finite(trace, grads, loss)
        adam_step(model.params, grads, state, lr,
                  config.adam_beta1, config.adam_beta2, config.adam_eps)
        return loss

    state = AdamState()
    for _ in range(config.warmup_epochs):
        trace = forward(model, x, a_norm)
        log.warmup.append(step(trace, state, config.warmup_lr, config.warmup_beta))

    state = AdamState()
    trace = None
    best_score = None
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        for _ in range(config.iters_per_epoch):
            if trace is None:
                trace = forward(model, x, a_norm)
            step(trace, state, config.lr, config.beta)
            trace = None
        trace = forward(model, x, a_norm)
        _check_finite(trace)
        loss = loss_breakdown(trace, model, deg, config.alpha, config.beta)
        res = spectral_cluster(deg, trace.a_hat, k, config.cluster_seed,
                               config.laplacian_mode, config.kmeans_restarts)
        ext = external_metrics(res.assignment, g.labels) if g.labels is not None else None
        rec = EpochRecord(
            epoch, loss,
            ext.acc if ext else None, ext.nmi if ext else None, ext.ari if ext else None,
            res.inertia, time.perf_counter() - t0,
        )
        log.records.append(rec)
        score = rec.acc if ext else -loss.total
        if best_score is None or score > best_score:
            best_score = score
            log.best_epoch = epoch
            log.best_model = model.copy()
            log.best_assignment = res.assignment
    return model, log
