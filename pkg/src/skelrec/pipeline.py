"""End-to-end runs: select arrangements, encode, train, merge, report.

A run is a pure function of its configuration. Every random choice is keyed
off ``RunConfig.seed`` through named streams, and each classifier trains from
a seed derived from (seed, classifier index) alone, so results are identical
at any worker-pool size and on repeated runs. Result files carry no
timestamps for the same reason.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import arrangement as arng
from . import skeleton as skel
from .metrics import Metrics, metrics_from_predictions
from .models import (
    CnnClassifier,
    CnnConfig,
    ConsensusConfig,
    ConsensusMlp,
    VitClassifier,
    VitConfig,
    fit,
    stack_posteriors,
)
from .pseudoimage import encode

# Seed-stream tags; see derive_seed.
_SYNTH_TRAIN_STREAM = 10
_SYNTH_TEST_STREAM = 11
_CLASSIFIER_STREAM = 20
_CONSENSUS_STREAM = 30

_CSV_FIELDS = ("kind", "index", "accuracy", "precision", "recall", "f_score", "support")


def derive_seed(seed: int, *key: int) -> int:
    """Stable child seed for a named stream; independent of evaluation order."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class RunConfig:
    """Everything a full three-level run depends on.

    ``dataset`` is either the literal string "synthetic" or a directory of
    ``*.skeleton`` files; ``split`` only applies to directory datasets
    (synthetic data is generated already split). ``workers`` and ``out_dir``
    affect scheduling and file placement, never numbers, and are excluded
    from the config hash.
    """

    dataset: str = "synthetic"
    split: str = "cross_view"
    classifier: str = "vit"
    ensemble_size: int = 25
    num_draws: int = 1000
    frames: int = 25
    seed: int = 0
    epochs: int = 100
    lr: float = 1e-3
    batch_size: int = 64
    level3_epochs: int | None = None
    level3_lr: float | None = None
    average_posteriors: bool = False
    synth_train_per_class: int = 200
    synth_test_per_class: int = 100
    workers: int = 1
    out_dir: str = "runs/run0"

    def __post_init__(self):
        if self.classifier not in ("vit", "cnn"):
            raise ValueError(f"classifier must be 'vit' or 'cnn', got {self.classifier!r}")
        if self.split not in ("cross_subject", "cross_view"):
            raise ValueError(f"unknown split {self.split!r}")
        for name in (
            "ensemble_size",
            "num_draws",
            "frames",
            "batch_size",
            "workers",
            "synth_train_per_class",
            "synth_test_per_class",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 0 or (self.level3_epochs is not None and self.level3_epochs < 0):
            raise ValueError("epochs must be >= 0")
        if self.lr <= 0 or (self.level3_lr is not None and self.level3_lr <= 0):
            raise ValueError("learning rates must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def config_hash(self) -> str:
        payload = {k: v for k, v in self.to_dict().items() if k not in ("workers", "out_dir")}
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunResult:
    config: RunConfig
    out_dir: Path
    arrangement: np.ndarray
    arrangement_score: int
    arrangement_sha256: str
    per_classifier: list[Metrics]
    average: Metrics
    posterior_average: Metrics | None
    consensus: Metrics
    loss_curves: list[list[float]]
    consensus_curve: list[float]


def _load_data(cfg: RunConfig) -> tuple[list, list, dict]:
    """Materialise (train, test) sequences plus realized per-class counts."""
    c = skel.num_classes()
    if cfg.dataset == "synthetic":
        train_seed = derive_seed(cfg.seed, _SYNTH_TRAIN_STREAM)
        test_seed = derive_seed(cfg.seed, _SYNTH_TEST_STREAM)
        train: list = []
        test: list = []
        for class_id in range(c):
            train += skel.synth_generate(class_id, cfg.synth_train_per_class, train_seed)
            test += skel.synth_generate(class_id, cfg.synth_test_per_class, test_seed)
    else:
        data_dir = Path(cfg.dataset)
        if not data_dir.is_dir():
            raise FileNotFoundError(f"dataset directory not found: {data_dir}")
        samples = skel.load_dataset_dir(data_dir)
        train, test = skel.split_dataset(samples, skel.SplitPolicy(kind=cfg.split))
    if not train or not test:
        raise ValueError(
            f"split produced an empty side: {len(train)} train / {len(test)} test samples"
        )

    def per_class(seqs):
        counts = [0] * c
        for s in seqs:
            counts[s.label] += 1
        return counts

    counts = {
        "train_total": len(train),
        "test_total": len(test),
        "train_per_class": per_class(train),
        "test_per_class": per_class(test),
    }
    return train, test, counts


def _encode_stack(seqs: list, arrangement: np.ndarray, T: int) -> np.ndarray:
    return np.stack([encode(s, arrangement, T)[0] for s in seqs])


def build_classifier(kind: str, num_classes: int, seed: int):
    if kind == "vit":
        return VitClassifier(VitConfig(num_classes=num_classes), seed=seed)
    if kind == "cnn":
        return CnnClassifier(CnnConfig(num_classes=num_classes), seed=seed)
    raise ValueError(f"unknown classifier kind {kind!r}")


def _train_classifier_task(task: tuple) -> tuple:
    """Train one ensemble member; module-level so worker processes can run it.

    All randomness inside comes from ``cseed``, so the result is the same
    whether this executes in the parent process or in any pool worker.
    """
    kind, num_classes, l, cseed, epochs, lr, batch_size, imgs_train, labels_train, imgs_test = task
    model = build_classifier(kind, num_classes, cseed)
    curve = fit(
        model,
        imgs_train,
        labels_train,
        epochs=epochs,
        lr=lr,
        batch_size=batch_size,
        shuffle_seed=cseed,
    )
    post_train = model.predict_posteriors(imgs_train)
    post_test = model.predict_posteriors(imgs_test)
    return l, model.state(), curve, post_train, post_test


def _metric_row(kind: str, index, m: Metrics) -> dict:
    row = {"kind": kind, "index": index}
    row.update({k: (float(v) if k != "support" else int(v)) for k, v in m.as_dict().items()})
    return row


def _average_metrics(per: list[Metrics], support: int) -> Metrics:
    return Metrics(
        accuracy=float(np.mean([m.accuracy for m in per])),
        precision=float(np.mean([m.precision for m in per])),
        recall=float(np.mean([m.recall for m in per])),
        f_score=float(np.mean([m.f_score for m in per])),
        support=support,
    )


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")


def _write_metric_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in _CSV_FIELDS})


def result_rows(result: RunResult) -> list[dict]:
    rows = [_metric_row("classifier", l, m) for l, m in enumerate(result.per_classifier)]
    rows.append(_metric_row("average", None, result.average))
    if result.posterior_average is not None:
        rows.append(_metric_row("posterior_average", None, result.posterior_average))
    rows.append(_metric_row("consensus", None, result.consensus))
    return rows


def run_pipeline(cfg: RunConfig) -> RunResult:
    """Execute all three levels and write artifacts under ``cfg.out_dir``.

    On any failure a ``failure.json`` marker capturing the error is left in
    the output directory and the exception propagates.
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    marker = out_dir / "failure.json"
    try:
        result = _run(cfg, out_dir)
    except Exception as exc:
        _write_json(marker, {"error": type(exc).__name__, "message": str(exc)})
        raise
    if marker.exists():
        marker.unlink()
    return result


def _run(cfg: RunConfig, out_dir: Path) -> RunResult:
    if cfg.frames != skel.NUM_JOINTS:
        raise ValueError(
            f"classifiers read square pseudo-images; frames must equal {skel.NUM_JOINTS}"
        )
    c = skel.num_classes()
    train_seqs, test_seqs, counts = _load_data(cfg)
    train_seqs = [skel.sample_frames(s, cfg.frames) for s in train_seqs]
    test_seqs = [skel.sample_frames(s, cfg.frames) for s in test_seqs]
    labels_train = np.array([s.label for s in train_seqs], dtype=np.int64)
    labels_test = np.array([s.label for s in test_seqs], dtype=np.int64)

    members, score = arng.select_best(cfg.seed, cfg.num_draws, cfg.ensemble_size, skel.NUM_JOINTS)
    arrangement_path = out_dir / "arrangement.txt"
    arng.save_arrangement_set(arrangement_path, members, N=cfg.num_draws, seed=cfg.seed, score=score)
    arrangement_sha = arng.arrangement_file_sha256(arrangement_path)

    tasks = [
        (
            cfg.classifier,
            c,
            l,
            derive_seed(cfg.seed, _CLASSIFIER_STREAM, l),
            cfg.epochs,
            cfg.lr,
            cfg.batch_size,
            _encode_stack(train_seqs, members[l], cfg.frames),
            labels_train,
            _encode_stack(test_seqs, members[l], cfg.frames),
        )
        for l in range(cfg.ensemble_size)
    ]
    if cfg.workers > 1 and cfg.ensemble_size > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, cfg.ensemble_size)) as pool:
            outcomes = list(pool.map(_train_classifier_task, tasks))
    else:
        outcomes = [_train_classifier_task(t) for t in tasks]

    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    loss_curves: list[list[float]] = []
    posts_train: list[np.ndarray] = []
    posts_test: list[np.ndarray] = []
    per_classifier: list[Metrics] = []
    reference = build_classifier(cfg.classifier, c, 0)
    for l, state, curve, post_train, post_test in outcomes:
        member_model = build_classifier(cfg.classifier, c, 0)
        member_model.load_state(state)
        member_model.save(ckpt_dir / f"classifier_{l:02d}.ckpt")
        loss_curves.append([float(v) for v in curve])
        posts_train.append(post_train)
        posts_test.append(post_test)
        per_classifier.append(
            metrics_from_predictions(labels_test, post_test.argmax(axis=1), c)
        )

    average = _average_metrics(per_classifier, len(labels_test))
    posterior_average = None
    if cfg.average_posteriors:
        mean_post = np.mean(posts_test, axis=0)
        posterior_average = metrics_from_predictions(labels_test, mean_post.argmax(axis=1), c)

    consensus_seed = derive_seed(cfg.seed, _CONSENSUS_STREAM)
    consensus = ConsensusMlp(
        ConsensusConfig(num_classifiers=cfg.ensemble_size, num_classes=c), seed=consensus_seed
    )
    consensus_curve = fit(
        consensus,
        stack_posteriors(posts_train),
        labels_train,
        epochs=cfg.epochs if cfg.level3_epochs is None else cfg.level3_epochs,
        lr=cfg.lr if cfg.level3_lr is None else cfg.level3_lr,
        batch_size=cfg.batch_size,
        shuffle_seed=consensus_seed,
    )
    consensus.save(ckpt_dir / "consensus.ckpt")
    consensus_pred = consensus.predict(stack_posteriors(posts_test))
    consensus_metrics = metrics_from_predictions(labels_test, consensus_pred, c)

    result = RunResult(
        config=cfg,
        out_dir=out_dir,
        arrangement=members,
        arrangement_score=int(score),
        arrangement_sha256=arrangement_sha,
        per_classifier=per_classifier,
        average=average,
        posterior_average=posterior_average,
        consensus=consensus_metrics,
        loss_curves=loss_curves,
        consensus_curve=[float(v) for v in consensus_curve],
    )

    manifest = {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "arrangement_sha256": arrangement_sha,
        "arrangement_score": int(score),
        "counts": counts,
        "num_classes": c,
        "param_counts": {
            "classifier": reference.param_count,
            "consensus": consensus.param_count,
        },
    }
    _write_json(out_dir / "manifest.json", manifest)
    results_doc = {
        "config_hash": cfg.config_hash(),
        "arrangement_score": int(score),
        "rows": result_rows(result),
        "loss_curves": loss_curves,
        "consensus_curve": result.consensus_curve,
    }
    _write_json(out_dir / "results.json", results_doc)
    _write_metric_csv(out_dir / "metrics.csv", result_rows(result))
    return result


def run_ablation(cfg: RunConfig, ensemble_sizes: list[int]) -> list[RunResult]:
    """One full pipeline per ensemble size, sharing the root seed.

    Sub-runs land in ``out_dir/L{size}``; a summary table is written at the
    top level.
    """
    if not ensemble_sizes:
        raise ValueError("no ensemble sizes given")
    results = []
    for size in ensemble_sizes:
        sub = replace(cfg, ensemble_size=size, out_dir=str(Path(cfg.out_dir) / f"L{size:02d}"))
        results.append(run_pipeline(sub))
    summary = [
        {
            "ensemble_size": size,
            "average_accuracy": res.average.accuracy,
            "consensus_accuracy": res.consensus.accuracy,
            "average_f_score": res.average.f_score,
            "consensus_f_score": res.consensus.f_score,
            "arrangement_score": res.arrangement_score,
        }
        for size, res in zip(ensemble_sizes, results)
    ]
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "ablation.json", summary)
    with open(out_dir / "ablation.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(summary[0].keys()))
        writer.writeheader()
        writer.writerows(summary)
    return results


def compare_classifiers(cfg: RunConfig) -> dict:
    """Matched-seed comparison of both classifier families.

    Both runs must select identical arrangement files (same seed, draws, and
    ensemble size); a mismatch means the comparison is not controlled and
    raises.
    """
    results: dict[str, RunResult] = {}
    for kind in ("vit", "cnn"):
        sub = replace(cfg, classifier=kind, out_dir=str(Path(cfg.out_dir) / kind))
        results[kind] = run_pipeline(sub)
    if results["vit"].arrangement_sha256 != results["cnn"].arrangement_sha256:
        raise RuntimeError("comparison not controlled: arrangement files differ between runs")

    rows = []
    for kind, res in results.items():
        rows.append({"classifier": kind, **_metric_row("average", None, res.average)})
        rows.append({"classifier": kind, **_metric_row("consensus", None, res.consensus)})
    comparison = {
        "arrangement_sha256": results["vit"].arrangement_sha256,
        "rows": rows,
        "consensus_gain": {
            kind: res.consensus.accuracy - res.average.accuracy for kind, res in results.items()
        },
    }
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "comparison.json", comparison)
    return comparison


def evaluate_run(run_dir: str | Path, dataset: str | None = None, split: str | None = None) -> dict:
    """Re-score a finished run's checkpoints, optionally on other data.

    Reads the manifest for the original configuration, rebuilds the test
    side, loads every checkpoint, and recomputes all metric rows.
    """
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    cfg = RunConfig.from_dict(manifest["config"])
    if dataset is not None:
        cfg = replace(cfg, dataset=dataset)
    if split is not None:
        cfg = replace(cfg, split=split)

    c = skel.num_classes()
    _, test_seqs, _ = _load_data(cfg)
    test_seqs = [skel.sample_frames(s, cfg.frames) for s in test_seqs]
    labels_test = np.array([s.label for s in test_seqs], dtype=np.int64)
    members, _ = arng.load_arrangement_set(run_dir / "arrangement.txt")
    if members.shape[0] != cfg.ensemble_size:
        raise ValueError("arrangement file does not match the run's ensemble size")

    posts = []
    per_classifier = []
    for l in range(cfg.ensemble_size):
        model = build_classifier(cfg.classifier, c, 0)
        model.load(run_dir / "checkpoints" / f"classifier_{l:02d}.ckpt")
        imgs = _encode_stack(test_seqs, members[l], cfg.frames)
        post = model.predict_posteriors(imgs)
        posts.append(post)
        per_classifier.append(metrics_from_predictions(labels_test, post.argmax(axis=1), c))

    consensus = ConsensusMlp(ConsensusConfig(num_classifiers=cfg.ensemble_size, num_classes=c))
    consensus.load(run_dir / "checkpoints" / "consensus.ckpt")
    consensus_metrics = metrics_from_predictions(
        labels_test, consensus.predict(stack_posteriors(posts)), c
    )

    rows = [_metric_row("classifier", l, m) for l, m in enumerate(per_classifier)]
    rows.append(_metric_row("average", None, _average_metrics(per_classifier, len(labels_test))))
    rows.append(_metric_row("consensus", None, consensus_metrics))
    doc = {"rows": rows, "dataset": cfg.dataset, "split": cfg.split}
    _write_json(run_dir / "evaluation.json", doc)
    return doc


def format_rows(rows: list[dict]) -> str:
    """Fixed-width text table for metric rows."""
    header = f"{'kind':<20}{'index':>6}{'accuracy':>10}{'precision':>11}{'recall':>9}{'f_score':>10}"
    lines = [header, "-" * len(header)]
    for row in rows:
        idx = "-" if row.get("index") is None else str(row["index"])
        lines.append(
            f"{row['kind']:<20}{idx:>6}{row['accuracy']:>10.4f}"
            f"{row['precision']:>11.4f}{row['recall']:>9.4f}{row['f_score']:>10.4f}"
        )
    return "\n".join(lines)
