"""Multi-run training, k-sweeps, ablations and checkpoint evaluation with artifacts."""

from __future__ import annotations

import csv
import dataclasses
import json
import os
from pathlib import Path

import numpy as np

from .clustering import kmeans, spectral_cluster
from .config import ExperimentConfig
from .graph import AttributedGraph, DataError, degree_matrix, load_graph, normalize_adjacency
from .metrics import MetricBundle, evaluate, external_metrics
from .model import VARIANTS, GcgqModel, forward, load_checkpoint, save_checkpoint
from .training import TrainLog, train

EXTERNAL = ("acc", "nmi", "ari")
CURVE_COLUMNS = ("epoch", "kl", "reg", "sc", "total", "acc", "nmi", "ari")

# number of train() invocations made through this module; sweep_k trains once
training_calls = 0


def _train(g, cfg: ExperimentConfig, run: int):
    global training_calls
    training_calls += 1
    return train(g, cfg.arch, cfg.train_for_run(run))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_assignments(path: Path, assignment) -> None:
    path.write_text("".join(f"{int(c)}\n" for c in assignment), encoding="utf-8")


def write_embedding(path: Path, matrix: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def resolve_dataset(path: str) -> Path:
    """Relative paths missing under the working directory are looked up in ``$GCGQ_DATA_DIR``."""
    p = Path(path)
    root = os.environ.get("GCGQ_DATA_DIR")
    if not p.is_absolute() and not p.exists() and root:
        for candidate in (Path(root) / p, Path(root) / p.name):
            if candidate.exists():
                return candidate
    return p


def load_dataset(cfg: ExperimentConfig) -> AttributedGraph:
    if cfg.dataset is None:
        raise DataError("no dataset path configured")
    return load_graph(resolve_dataset(cfg.dataset))


def checkpoint_meta(cfg_train, k: int | None) -> dict:
    return {
        "cluster_seed": cfg_train.cluster_seed,
        "degree_mode": cfg_train.degree_mode,
        "laplacian_mode": cfg_train.laplacian_mode,
        "kmeans_restarts": cfg_train.kmeans_restarts,
        "n_clusters": k,
    }


def cluster_model(model: GcgqModel, g: AttributedGraph, k: int, meta: dict,
                  a_norm=None, internal_on: str = "spectral"):
    """Forward pass, spectral clustering at ``k`` and the full metric bundle."""
    if a_norm is None:
        a_norm = normalize_adjacency(g, meta["degree_mode"])
    trace = forward(model, g.attributes, a_norm)
    res = spectral_cluster(degree_matrix(g), trace.a_hat, k, meta["cluster_seed"],
                           meta["laplacian_mode"], meta["kmeans_restarts"])
    points = res.embedding.matrix if internal_on == "spectral" else trace.gamma
    bundle = evaluate(points, res.assignment, g.labels)
    return trace, res, bundle


def metrics_document(bundle: MetricBundle, k: int, n: int, internal_on: str) -> dict:
    doc = bundle.to_dict()
    if doc["acc"] is None:
        for key in EXTERNAL:
            doc.pop(key)
    doc.update({"k": k, "n": n, "representation": internal_on})
    return doc


def _write_run(run_dir: Path, g, cfg: ExperimentConfig, run: int, model, log: TrainLog):
    run_dir.mkdir(parents=True, exist_ok=True)
    tc = cfg.train_for_run(run)
    k = tc.n_clusters or g.k_true
    write_json(run_dir / "train_log.json", log.to_dict())
    write_csv(run_dir / "training_curve.csv", CURVE_COLUMNS, [
        (r.epoch, r.loss.kl, r.loss.reg, r.loss.sc, r.loss.total, r.acc, r.nmi, r.ari)
        for r in log.records
    ])
    best = log.best_model if log.best_model is not None else model
    meta = checkpoint_meta(tc, k)
    save_checkpoint(best, run_dir / "checkpoint.gcgq", meta)
    if k is not None and log.best_epoch is not None:
        _, res, bundle = cluster_model(best, g, k, meta, internal_on=cfg.internal_on)
        write_assignments(run_dir / "assignments.txt", res.assignment)
        write_embedding(run_dir / "embedding.csv", res.embedding.matrix)
        write_json(run_dir / "metrics.json", metrics_document(bundle, k, g.n, cfg.internal_on))


def _mean_std(values):
    arr = np.array(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def run_training(cfg: ExperimentConfig, g: AttributedGraph | None = None,
                 out: Path | None = None) -> dict:
    """``cfg.runs`` seeded trainings; returns (and writes) the summary document."""
    g = g if g is not None else load_dataset(cfg)
    out = Path(out if out is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    per_run = []
    for run in range(cfg.runs):
        model, log = _train(g, cfg, run)
        _write_run(out / f"run_{run:02d}", g, cfg, run, model, log)
        best = log.best
        entry = {"run": run, "seed": cfg.run_seed(run), "best_epoch": log.best_epoch}
        for key in EXTERNAL:
            entry[key] = getattr(best, key) if best is not None else None
        entry["total_loss"] = best.loss.total if best is not None else None
        per_run.append(entry)
    summary = {
        "dataset": cfg.dataset,
        "variant": cfg.arch.variant,
        "master_seed": cfg.seed,
        "runs": cfg.runs,
        "per_run": per_run,
    }
    for key in EXTERNAL:
        vals = [r[key] for r in per_run if r[key] is not None]
        if vals:
            summary[key] = dict(zip(("mean", "std"), _mean_std(vals)))
    write_json(out / "summary.json", summary)
    return summary


def sweep_k(cfg: ExperimentConfig, g: AttributedGraph | None = None,
            out: Path | None = None) -> list[dict]:
    """Train once, then cluster the same reconstruction at every ``k`` in ``cfg.k_list``."""
    g = g if g is not None else load_dataset(cfg)
    if not cfg.k_list:
        raise ValueError("k_list is empty")
    bad = [k for k in cfg.k_list if k > g.n]
    if bad:
        raise ValueError(f"k values {bad} exceed the node count {g.n}")
    out = Path(out if out is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    tc = cfg.train_for_run(0)
    train_cfg = cfg
    if tc.n_clusters is None and g.k_true is None:
        # without labels the epoch evaluation runs at the first requested k
        train_cfg = dataclasses.replace(
            cfg, train=dataclasses.replace(cfg.train, n_clusters=cfg.k_list[0]))
        tc = train_cfg.train_for_run(0)
    model, log = _train(g, train_cfg, 0)
    _write_run(out / "run_00", g, train_cfg, 0, model, log)
    best = log.best_model if log.best_model is not None else model
    meta = checkpoint_meta(tc, None)
    a_norm = normalize_adjacency(g, tc.degree_mode)
    trace = forward(best, g.attributes, a_norm)
    deg = degree_matrix(g)
    rows = []
    for k in cfg.k_list:
        res = spectral_cluster(deg, trace.a_hat, k, meta["cluster_seed"],
                               meta["laplacian_mode"], meta["kmeans_restarts"])
        points = res.embedding.matrix if cfg.internal_on == "spectral" else trace.gamma
        bundle = evaluate(points, res.assignment, g.labels)
        raw = kmeans(g.attributes, k, restarts=tc.kmeans_restarts, rng_seed=meta["cluster_seed"])
        raw_sc = evaluate(g.attributes, raw.assignment).sc
        rows.append({"k": k, **bundle.to_dict(), "raw_sc": raw_sc})
    header = ("k", "sc", "dbi", "chi", "acc", "nmi", "ari", "raw_sc")
    if g.labels is None:
        header = ("k", "sc", "dbi", "chi", "raw_sc")
    write_csv(out / "sweep.csv", header, [[r[h] for h in header] for r in rows])
    return rows


def ablate(cfg: ExperimentConfig, g: AttributedGraph | None = None,
           out: Path | None = None, variants=VARIANTS) -> dict:
    """Run every variant with identical data, seeds and hyperparameters."""
    g = g if g is not None else load_dataset(cfg)
    out = Path(out if out is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    table = {}
    for variant in variants:
        vcfg = dataclasses.replace(cfg, arch=dataclasses.replace(cfg.arch, variant=variant))
        table[variant] = run_training(vcfg, g, out / variant)
    header = ["variant"] + [f"{m}_{s}" for m in EXTERNAL for s in ("mean", "std")]
    rows = []
    for variant, summary in table.items():
        row = [variant]
        for m in EXTERNAL:
            stats = summary.get(m, {})
            row += [stats.get("mean"), stats.get("std")]
        rows.append(row)
    write_csv(out / "ablation.csv", header, rows)
    doc = {v: {m: s.get(m) for m in EXTERNAL} for v, s in table.items()}
    write_json(out / "ablation.json", doc)
    return doc


def evaluate_checkpoint(checkpoint, g: AttributedGraph, k: int | None = None,
                        internal_on: str = "spectral", out: Path | None = None) -> dict:
    model, meta = load_checkpoint(checkpoint)
    if model.input_dim != g.d:
        raise DataError(
            f"checkpoint expects {model.input_dim} attributes, dataset has {g.d}")
    k = k or meta.get("n_clusters") or g.k_true
    if k is None:
        raise ValueError("number of clusters unknown: pass k or use a labelled dataset")
    if k > g.n:
        raise ValueError(f"k={k} exceeds the node count {g.n}")
    _, res, bundle = cluster_model(model, g, k, meta, internal_on=internal_on)
    doc = metrics_document(bundle, k, g.n, internal_on)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "metrics.json", doc)
        write_assignments(out / "assignments.txt", res.assignment)
        write_embedding(out / "embedding.csv", res.embedding.matrix)
    return doc


def external_only(assignment, labels) -> dict:
    return dataclasses.asdict(external_metrics(assignment, labels))
