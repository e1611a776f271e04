"""Orchestration tests on a tiny synthetic run: artifacts, determinism, CLI."""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from skelrec import cli
from skelrec.arrangement import arrangement_file_sha256, load_arrangement_set
from skelrec.pipeline import (
    RunConfig,
    compare_classifiers,
    derive_seed,
    evaluate_run,
    format_rows,
    result_rows,
    run_ablation,
    run_pipeline,
)
from skelrec.pseudoimage import import_png


def tiny_config(out_dir: Path, **overrides) -> RunConfig:
    base = dict(
        dataset="synthetic",
        classifier="cnn",
        ensemble_size=2,
        num_draws=20,
        seed=7,
        epochs=1,
        lr=1e-3,
        batch_size=16,
        synth_train_per_class=3,
        synth_test_per_class=2,
        average_posteriors=True,
        out_dir=str(out_dir),
    )
    base.update(overrides)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def base_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("base_run")
    cfg = tiny_config(out)
    return cfg, run_pipeline(cfg)


# -- config contract ----------------------------------------------------------


def test_config_roundtrip_and_unknown_key():
    cfg = tiny_config(Path("x"))
    assert RunConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError, match="unknown config keys.*bogus"):
        RunConfig.from_dict({"bogus": 1})


def test_config_validation():
    with pytest.raises(ValueError, match="classifier"):
        RunConfig(classifier="svm")
    with pytest.raises(ValueError, match="split"):
        RunConfig(split="random")
    with pytest.raises(ValueError, match="ensemble_size"):
        RunConfig(ensemble_size=0)
    with pytest.raises(ValueError, match="epochs"):
        RunConfig(epochs=-1)
    with pytest.raises(ValueError, match="positive"):
        RunConfig(lr=0.0)
    with pytest.raises(ValueError, match="positive"):
        RunConfig(level3_lr=-1e-3)


def test_config_hash_ignores_placement_only_fields():
    cfg = tiny_config(Path("a"))
    assert replace(cfg, workers=8).config_hash() == cfg.config_hash()
    assert replace(cfg, out_dir="elsewhere").config_hash() == cfg.config_hash()
    assert replace(cfg, seed=8).config_hash() != cfg.config_hash()
    assert replace(cfg, classifier="vit").config_hash() != cfg.config_hash()


def test_derive_seed_is_stable_and_keyed():
    assert derive_seed(7, 20, 0) == derive_seed(7, 20, 0)
    assert derive_seed(7, 20, 0) != derive_seed(7, 20, 1)
    assert derive_seed(7, 20, 0) != derive_seed(8, 20, 0)


# -- artifacts and rows -------------------------------------------------------


def test_run_writes_all_artifacts(base_run):
    cfg, result = base_run
    out = Path(cfg.out_dir)
    for name in ("arrangement.txt", "manifest.json", "results.json", "metrics.csv"):
        assert (out / name).exists(), name
    for l in range(cfg.ensemble_size):
        assert (out / "checkpoints" / f"classifier_{l:02d}.ckpt").exists()
    assert (out / "checkpoints" / "consensus.ckpt").exists()
    assert not (out / "failure.json").exists()

    members, header = load_arrangement_set(out / "arrangement.txt")
    assert members.shape == (cfg.ensemble_size, 25)
    assert int(header["score"]) == result.arrangement_score
    assert arrangement_file_sha256(out / "arrangement.txt") == result.arrangement_sha256


def test_manifest_contents(base_run):
    cfg, _ = base_run
    manifest = json.loads((Path(cfg.out_dir) / "manifest.json").read_text())
    assert manifest["config"] == cfg.to_dict()
    assert manifest["config_hash"] == cfg.config_hash()
    assert manifest["num_classes"] == 14
    assert manifest["counts"]["train_total"] == 14 * cfg.synth_train_per_class
    assert manifest["counts"]["test_total"] == 14 * cfg.synth_test_per_class
    assert manifest["param_counts"]["classifier"] == 159_758


def test_result_rows_shape(base_run):
    cfg, result = base_run
    rows = result_rows(result)
    kinds = [r["kind"] for r in rows]
    assert kinds == ["classifier"] * cfg.ensemble_size + [
        "average",
        "posterior_average",
        "consensus",
    ]
    n_test = 14 * cfg.synth_test_per_class
    for row in rows:
        for key in ("accuracy", "precision", "recall", "f_score"):
            assert 0.0 <= row[key] <= 1.0
        assert row["support"] == n_test
    doc = json.loads((Path(cfg.out_dir) / "results.json").read_text())
    assert doc["rows"] == rows
    assert doc["config_hash"] == cfg.config_hash()
    assert len(doc["loss_curves"]) == cfg.ensemble_size
    assert all(len(c) == cfg.epochs for c in doc["loss_curves"])


def test_average_row_is_mean_of_classifier_rows(base_run):
    _, result = base_run
    for field in ("accuracy", "precision", "recall", "f_score"):
        vals = [getattr(m, field) for m in result.per_classifier]
        assert getattr(result.average, field) == pytest.approx(np.mean(vals))


def test_format_rows_is_a_table(base_run):
    _, result = base_run
    text = format_rows(result_rows(result))
    lines = text.splitlines()
    assert lines[0].split() == ["kind", "index", "accuracy", "precision", "recall", "f_score"]
    assert len(lines) == 2 + len(result_rows(result))
    assert lines[-1].startswith("consensus")


# -- determinism --------------------------------------------------------------


def test_identical_config_reproduces_every_byte(base_run, tmp_path):
    cfg, _ = base_run
    rerun_cfg = replace(cfg, out_dir=str(tmp_path / "rerun"))
    run_pipeline(rerun_cfg)
    a, b = Path(cfg.out_dir), Path(rerun_cfg.out_dir)
    for rel in (
        "results.json",
        "metrics.csv",
        "arrangement.txt",
        "checkpoints/classifier_00.ckpt",
        "checkpoints/classifier_01.ckpt",
        "checkpoints/consensus.ckpt",
    ):
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_worker_pool_size_does_not_change_results(base_run, tmp_path):
    cfg, _ = base_run
    pooled_cfg = replace(cfg, workers=2, out_dir=str(tmp_path / "pooled"))
    run_pipeline(pooled_cfg)
    a, b = Path(cfg.out_dir), Path(pooled_cfg.out_dir)
    for rel in (
        "results.json",
        "metrics.csv",
        "checkpoints/classifier_00.ckpt",
        "checkpoints/classifier_01.ckpt",
        "checkpoints/consensus.ckpt",
    ):
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


# -- re-evaluation ------------------------------------------------------------


def test_evaluate_run_matches_training_metrics(base_run):
    cfg, result = base_run
    doc = evaluate_run(cfg.out_dir)
    assert (Path(cfg.out_dir) / "evaluation.json").exists()
    original = [r for r in result_rows(result) if r["kind"] != "posterior_average"]
    assert doc["rows"] == original


def test_evaluate_run_rejects_missing_checkpoints(tmp_path):
    with pytest.raises(FileNotFoundError):
        evaluate_run(tmp_path)


# -- sweeps -------------------------------------------------------------------


def test_ablation_writes_summary_and_matches_sub_runs(base_run, tmp_path):
    cfg, _ = base_run
    root = tmp_path / "ablate"
    results = run_ablation(replace(cfg, out_dir=str(root)), [1, 2])
    summary = json.loads((root / "ablation.json").read_text())
    assert [row["ensemble_size"] for row in summary] == [1, 2]
    assert (root / "ablation.csv").exists()
    for row, res in zip(summary, results):
        assert row["consensus_accuracy"] == res.consensus.accuracy
        assert row["average_accuracy"] == res.average.accuracy
    # the L=2 sub-run differs from the base run only in out_dir
    assert (root / "L02" / "results.json").read_bytes() == (
        Path(cfg.out_dir) / "results.json"
    ).read_bytes()
    with pytest.raises(ValueError, match="no ensemble sizes"):
        run_ablation(cfg, [])


def test_compare_trains_both_kinds_on_one_arrangement(tmp_path):
    cfg = tiny_config(tmp_path / "cmp", ensemble_size=1, synth_train_per_class=2,
                      synth_test_per_class=1, average_posteriors=False)
    comparison = compare_classifiers(cfg)
    doc = json.loads((tmp_path / "cmp" / "comparison.json").read_text())
    assert doc == comparison
    assert set(comparison["consensus_gain"]) == {"vit", "cnn"}
    for kind in ("vit", "cnn"):
        sub = tmp_path / "cmp" / kind / "arrangement.txt"
        assert arrangement_file_sha256(sub) == comparison["arrangement_sha256"]
    kinds = {(r["classifier"], r["kind"]) for r in comparison["rows"]}
    assert kinds == {(k, m) for k in ("vit", "cnn") for m in ("average", "consensus")}


# -- failure handling ---------------------------------------------------------


def test_failure_leaves_marker(tmp_path):
    cfg = tiny_config(tmp_path / "bad", dataset=str(tmp_path / "missing_dir"))
    with pytest.raises(FileNotFoundError):
        run_pipeline(cfg)
    marker = json.loads((tmp_path / "bad" / "failure.json").read_text())
    assert marker["error"] == "FileNotFoundError"


def test_non_square_frames_rejected(tmp_path):
    cfg = tiny_config(tmp_path / "f20", frames=20)
    with pytest.raises(ValueError, match="frames must equal 25"):
        run_pipeline(cfg)
    assert (tmp_path / "f20" / "failure.json").exists()


# -- CLI ----------------------------------------------------------------------


def test_cli_synth_select_encode(tmp_path, capsys):
    data_dir = tmp_path / "data"
    assert cli.main(["synth", "--out", str(data_dir), "--per-class", "1", "--seed", "3"]) == 0
    assert (data_dir / "manifest.json").exists()
    assert len(list(data_dir.glob("*.skeleton"))) == 14

    arr_path = tmp_path / "arr.txt"
    assert cli.main([
        "select", "--out", str(arr_path), "--seed", "3", "--draws", "10",
        "--ensemble-size", "2",
    ]) == 0
    members, header = load_arrangement_set(arr_path)
    assert members.shape == (2, 25)
    assert capsys.readouterr().out.count("wrote") == 2

    img_dir = tmp_path / "imgs"
    assert cli.main([
        "encode", "--data", str(data_dir), "--arrangement", str(arr_path),
        "--out", str(img_dir), "--format", "png", "--limit", "3",
    ]) == 0
    pngs = sorted(img_dir.glob("arr*/*.png"))
    assert len(pngs) == 6
    assert import_png(pngs[0]).shape == (25, 25, 3)


def test_cli_train_report_eval_with_config_file(tmp_path, capsys):
    out = tmp_path / "run"
    cfg_file = tmp_path / "cfg.json"
    # the flag overrides the file's seed; num_draws proves the file was read
    cfg_file.write_text(json.dumps({
        "classifier": "cnn", "ensemble_size": 1, "num_draws": 7, "seed": 1,
        "epochs": 1, "batch_size": 16, "synth_train_per_class": 2,
        "synth_test_per_class": 1,
    }))
    rc = cli.main([
        "train", "--config", str(cfg_file), "--seed", "9", "--out", str(out),
    ])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["num_draws"] == 7
    assert manifest["config"]["seed"] == 9
    train_out = capsys.readouterr().out
    assert "consensus" in train_out and str(out) in train_out

    assert cli.main(["report", "--run", str(out)]) == 0
    assert "consensus" in capsys.readouterr().out

    assert cli.main(["eval", "--run", str(out)]) == 0
    assert "consensus" in capsys.readouterr().out
    assert (out / "evaluation.json").exists()


def test_cli_errors_are_json_records(tmp_path, capsys):
    assert cli.main(["report", "--run", str(tmp_path / "nope")]) == 1
    record = json.loads(capsys.readouterr().err)
    assert record["error"] == "FileNotFoundError"

    assert cli.main(["train", "--out", str(tmp_path / "r"), "--classifier", "cnn",
                     "--frames", "0"]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "ValueError"
