import dataclasses
import json

import numpy as np
import pytest

from gcgq import experiments
from gcgq.config import ExperimentConfig
from gcgq.graph import AttributedGraph, DataError, generate_planted_partition
from gcgq.model import ArchitectureSpec, init_model
from gcgq.training import TrainConfig


@pytest.fixture
def cfg():
    return ExperimentConfig(
        arch=ArchitectureSpec(fvp_dim=8, qge_dims=(6, 4)),
        train=TrainConfig(warmup_epochs=2, epochs=3, iters_per_epoch=2),
        runs=2, seed=5, k_list=(2, 3, 4),
    )


@pytest.fixture
def graph():
    return generate_planted_partition(3, 12, 0.5, 0.03, attr_dim=5, rng_seed=2)


def read(path):
    return path.read_bytes()


def test_run_training_artifacts(tmp_path, cfg, graph):
    summary = experiments.run_training(cfg, graph, tmp_path)
    assert summary["runs"] == 2 and len(summary["per_run"]) == 2
    for key in ("acc", "nmi", "ari"):
        vals = [r[key] for r in summary["per_run"]]
        assert summary[key]["mean"] == pytest.approx(np.mean(vals))
        assert summary[key]["std"] == pytest.approx(np.std(vals))
    run = tmp_path / "run_00"
    for name in ("train_log.json", "training_curve.csv", "checkpoint.gcgq",
                 "assignments.txt", "embedding.csv", "metrics.json"):
        assert (run / name).exists()
    curve = (run / "training_curve.csv").read_text().splitlines()
    assert curve[0] == "epoch,kl,reg,sc,total,acc,nmi,ari" and len(curve) == 4
    assert "wall_time" not in (tmp_path / "summary.json").read_text()


def test_artifacts_reproducible(tmp_path, cfg, graph):
    experiments.run_training(cfg, graph, tmp_path / "a")
    experiments.run_training(cfg, graph, tmp_path / "b")
    for name in ("summary.json", "run_01/training_curve.csv", "run_01/checkpoint.gcgq",
                 "run_01/metrics.json", "run_01/embedding.csv"):
        assert read(tmp_path / "a" / name) == read(tmp_path / "b" / name)


def test_eval_reproduces_run_metrics(tmp_path, cfg, graph):
    experiments.run_training(cfg, graph, tmp_path)
    run = tmp_path / "run_01"
    doc = experiments.evaluate_checkpoint(run / "checkpoint.gcgq", graph, out=tmp_path / "ev")
    assert read(tmp_path / "ev" / "metrics.json") == read(run / "metrics.json")
    log = json.loads((run / "train_log.json").read_text())
    best = log["records"][log["best_epoch"]]
    assert (doc["acc"], doc["nmi"], doc["ari"]) == (best["acc"], best["nmi"], best["ari"])


def test_eval_without_labels_omits_external(tmp_path, cfg, graph):
    experiments.run_training(dataclasses.replace(cfg, runs=1), graph, tmp_path)
    bare = dataclasses.replace(graph, labels=None)
    doc = experiments.evaluate_checkpoint(tmp_path / "run_00" / "checkpoint.gcgq", bare)
    assert "acc" not in doc and doc["k"] == 3 and doc["sc"] is not None


def test_eval_rejects_mismatch(tmp_path, cfg, graph):
    experiments.run_training(dataclasses.replace(cfg, runs=1), graph, tmp_path)
    other = AttributedGraph(graph.adjacency, graph.attributes[:, :3], graph.labels)
    with pytest.raises(DataError, match="attributes"):
        experiments.evaluate_checkpoint(tmp_path / "run_00" / "checkpoint.gcgq", other)


def test_warmup_only_run(tmp_path, cfg, graph):
    cfg = dataclasses.replace(cfg, runs=1, train=dataclasses.replace(cfg.train, epochs=0))
    summary = experiments.run_training(cfg, graph, tmp_path)
    assert summary["per_run"][0]["best_epoch"] is None and "acc" not in summary
    assert (tmp_path / "run_00" / "checkpoint.gcgq").exists()
    assert (tmp_path / "run_00" / "training_curve.csv").read_text().count("\n") == 1


def test_sweep_trains_once(tmp_path, cfg, graph):
    before = experiments.training_calls
    rows = experiments.sweep_k(cfg, graph, tmp_path)
    assert experiments.training_calls - before == 1
    assert [r["k"] for r in rows] == [2, 3, 4]
    assert all(r["sc"] is not None and r["raw_sc"] is not None for r in rows)
    header = (tmp_path / "sweep.csv").read_text().splitlines()[0]
    assert header == "k,sc,dbi,chi,acc,nmi,ari,raw_sc"


def test_sweep_k_true_matches_training_path(tmp_path, cfg, graph):
    cfg = dataclasses.replace(cfg, runs=1, k_list=(3,))
    rows = experiments.sweep_k(cfg, graph, tmp_path)
    m = json.loads((tmp_path / "run_00" / "metrics.json").read_text())
    assert rows[0]["ari"] == m["ari"] and rows[0]["sc"] == m["sc"]


def test_sweep_k_equals_n(tmp_path, cfg):
    g = generate_planted_partition(2, 4, 0.9, 0.1, attr_dim=3, rng_seed=0)
    rows = experiments.sweep_k(dataclasses.replace(cfg, k_list=(8,)), g, tmp_path)
    assert rows[0]["chi"] is None
    line = (tmp_path / "sweep.csv").read_text().splitlines()[1].split(",")
    assert line[3] == ""


def test_sweep_rejects_large_k(tmp_path, cfg, graph):
    with pytest.raises(ValueError, match="exceed"):
        experiments.sweep_k(dataclasses.replace(cfg, k_list=(100,)), graph, tmp_path)


def test_ablation_shares_seeds(tmp_path, cfg, graph):
    doc = experiments.ablate(dataclasses.replace(cfg, runs=1), graph, tmp_path)
    assert set(doc) == {"full", "no_fvp", "no_qge", "baseline"}
    seeds = {json.loads((tmp_path / v / "summary.json").read_text())["per_run"][0]["seed"]
             for v in doc}
    assert len(seeds) == 1
    # identical projection streams across variants
    tc = cfg.train_for_run(0)
    full = init_model(cfg.arch, graph.d, tc.init_seed)
    base = init_model(dataclasses.replace(cfg.arch, variant="baseline"), graph.d, tc.init_seed)
    np.testing.assert_array_equal(full.projection()[0], base.params["proj.w"])
    assert (tmp_path / "ablation.csv").read_text().startswith("variant,acc_mean,acc_std")


def test_dataset_env_lookup(tmp_path, monkeypatch, cfg, graph):
    from gcgq.graph import save_graph
    save_graph(graph, tmp_path / "store" / "mini")
    monkeypatch.setenv("GCGQ_DATA_DIR", str(tmp_path / "store"))
    monkeypatch.chdir(tmp_path)
    g = experiments.load_dataset(dataclasses.replace(cfg, dataset="data/mini"))
    assert g.n == graph.n
