import json

import numpy as np
import pytest

from scedae.anchor import AnchorConfig
from scedae.cli import main
from scedae.config import ConfigError, parse_config
from scedae.datasets import preprocess
from scedae.ensemble import sc_edae
from scedae.core import derive_seed
from scedae.experiment import EncodingCache, load_dataset, run
from scedae.kmeans import KMeansConfig
from scedae.metrics import accuracy


def tiny(mode, **over):
    raw = {"dataset": {"generator": "lsun", "seed": 1, "lift": "sigmoid_stack"}, "mode": mode, "widths": [8, 6],
           "epochs": [3], "landmarks": [20], "replicates": 2, "n_jobs": 1,
           "autoencoder": {"encoding_dim": 4, "batch_size": 64}}
    raw.update(over)
    return parse_config(raw)


def test_defaults_resolve_per_mode():
    cfg = parse_config({"dataset": {"generator": "tetra"}, "mode": "ens_struct"})
    assert cfg.m == 6 and len(cfg.structures) == 6 and cfg.epochs == [200] and cfg.landmarks == [100]
    cfg = parse_config({"dataset": {"generator": "tetra"}, "mode": "ens_epochs"})
    assert cfg.epochs == [50, 100, 150, 200, 250] and cfg.m == 5
    cfg = parse_config({"dataset": {"generator": "tetra"}, "mode": "ens_landmarks", "m": 3})
    assert cfg.landmarks == [100, 200, 300]
    cfg = parse_config({"dataset": {"generator": "tetra"}, "mode": "baseline_lsc"})
    assert cfg.m == 1


@pytest.mark.parametrize("raw", [
    {"dataset": {"generator": "tetra"}, "mode": "ens_struct", "bogus": 1},
    {"dataset": {"generator": "tetra", "colour": 1}, "mode": "ens_struct"},
    {"dataset": {"generator": "tetra"}, "mode": "ens_struct", "m": 4},
    {"dataset": {"generator": "tetra"}, "mode": "ens_epochs", "epochs": [50, 50]},
    {"dataset": {"generator": "tetra"}, "mode": "baseline_lsc", "m": 3},
    {"dataset": {"generator": "tetra", "path": "x.csv"}, "mode": "ens_struct"},
    {"dataset": {"generator": "tetra"}, "mode": "nope"},
])
def test_bad_configs_rejected(raw):
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_cli_rejects_unknown_key_with_exit_2(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"dataset": {"generator": "tetra"}, "mode": "ens_struct", "extra": True}))
    assert main(["run", "--config", str(p)]) == 2
    assert "extra" in capsys.readouterr().err
    assert main(["run"]) == 2


def test_every_mode_runs_and_reports(tmp_path):
    cache = EncodingCache()
    for mode in ("ens_init", "ens_epochs", "ens_struct", "ens_landmarks",
                 "baseline_kmeanspp", "baseline_lsc", "baseline_dae_kmeans", "baseline_dae_lsc"):
        over = {}
        if mode == "ens_epochs":
            over["epochs"] = [2, 3]
        if mode == "ens_landmarks":
            over["landmarks"] = [20, 30]
        if mode == "ens_init":
            over["init_seeds"] = [0, 1]
        if mode == "ens_struct":
            over["structures"] = [[8, 6], [6, 8]]
        rep = run(tiny(mode, **over), cache=cache)
        assert not rep.failures, (mode, rep.failures)
        assert len(rep.metric_values("acc")) == 2
        assert rep.pooled["acc"]["count"] >= 2
        assert all(0 <= v <= 1 for v in rep.metric_values("acc"))


def test_baseline_lsc_equals_single_member_pipeline():
    cfg = tiny("baseline_lsc", replicates=1)
    rep = run(cfg)
    ds = load_dataset(cfg)
    x = preprocess(ds.x)
    part, _, _ = sc_edae([x], AnchorConfig(p=20, r=5), KMeansConfig(3, seed=derive_seed(0, "kmeans", 0, 0)), 3,
                         seed=derive_seed(0, "landmarks", 0), labels=["p=20"])
    assert rep.metric_values("acc")[0] == accuracy(part, ds.labels)


def test_reports_are_byte_identical_and_parallel_safe(tmp_path):
    cfg = tiny("ens_init", init_seeds=[0, 1])
    a = run(cfg, n_jobs=1).to_json()
    b = run(cfg, n_jobs=2).to_json()
    assert a == b


def test_dropping_a_member_keeps_other_streams(tmp_path):
    cache_a, cache_b = EncodingCache(), EncodingCache()
    run(tiny("ens_init", init_seeds=[0, 1, 2], replicates=1), cache=cache_a)
    run(tiny("ens_init", init_seeds=[0, 2], replicates=1), cache=cache_b)
    shared = set(cache_a._store) & set(cache_b._store)
    assert len(shared) == 2
    for k in shared:
        for e, y in cache_a._store[k].items():
            np.testing.assert_array_equal(y, cache_b._store[k][e])


def test_gen_eval_and_run_via_cli(tmp_path, capsys):
    out = tmp_path / "lsun.csv"
    assert main(["gen", "--dataset", "lsun", "--seed", "2", "--out", str(out)]) == 0
    assert main(["gen", "--dataset", "tetra", "--lift", "sigmoid_stack", "--out", str(tmp_path / "t.bin")]) == 0
    truth = tmp_path / "truth.csv"
    truth.write_text("label\n0\n0\n1\n1\n")
    pred = tmp_path / "pred.csv"
    pred.write_text("1\n1\n0\n0\n")
    capsys.readouterr()
    assert main(["eval", "--pred", str(pred), "--truth", str(truth)]) == 0
    scores = json.loads(capsys.readouterr().out)
    assert scores == {"acc": 1.0, "nmi": 1.0, "ari": 1.0}
    pred.write_text("1\nx\n")
    assert main(["eval", "--pred", str(pred), "--truth", str(truth)]) == 3

    cfg = {"dataset": {"path": str(out)}, "mode": "baseline_lsc", "landmarks": [20], "replicates": 1,
           "labels_out": str(tmp_path / "labels.csv")}
    cpath = tmp_path / "c.json"
    cpath.write_text(json.dumps(cfg))
    report = tmp_path / "r.json"
    assert main(["run", "--config", str(cpath), "--output", str(report)]) == 0
    data = json.loads(report.read_text())
    assert data["dataset"]["n"] == 400 and "timings" not in data
    assert (tmp_path / "r.timings.json").exists()
    assert (tmp_path / "labels.rep0.csv").read_text().startswith("label\n")


def test_runtime_failure_exit_3(tmp_path):
    cfg = {"dataset": {"generator": "lsun"}, "mode": "baseline_lsc", "landmarks": [1000], "replicates": 1}
    cpath = tmp_path / "c.json"
    cpath.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(cpath), "--output", str(tmp_path / "r.json")]) == 3
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["failures"][0]["stage"] == "anchor_graph"
