"""Command-line entry points for the skeleton-recognition pipeline.

Subcommands: synth, select, encode, train, eval, ablate, compare, report.
Errors print a machine-readable JSON record to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import arrangement as arng
from . import skeleton as skel
from .pipeline import (
    RunConfig,
    compare_classifiers,
    evaluate_run,
    format_rows,
    result_rows,
    run_ablation,
    run_pipeline,
)
from .pseudoimage import encode, export_png, export_raw


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    """Flags mirroring RunConfig; defaults stay None so --config can fill them."""
    p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    p.add_argument("--data", dest="dataset", help="'synthetic' or a directory of .skeleton files")
    p.add_argument("--split", choices=["cross_subject", "cross_view"])
    p.add_argument("--classifier", choices=["vit", "cnn"])
    p.add_argument("--ensemble-size", type=int, help="number of arrangements / classifiers")
    p.add_argument("--draws", dest="num_draws", type=int, help="candidate sets sampled")
    p.add_argument("--frames", type=int, help="frames per pseudo-image")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--level3-epochs", type=int)
    p.add_argument("--level3-lr", type=float)
    p.add_argument(
        "--average-posteriors",
        action="store_const",
        const=True,
        help="also report the averaged-posteriors row",
    )
    p.add_argument("--synth-train-per-class", type=int)
    p.add_argument("--synth-test-per-class", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", dest="out_dir", help="run output directory")


def _build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        values.update(json.loads(Path(args.config).read_text()))
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    return RunConfig.from_dict(values)


def _cmd_synth(args) -> int:
    samples = []
    for class_id in range(skel.num_classes()):
        samples += skel.synth_generate(class_id, args.per_class, args.seed)
    out = skel.dump_dataset(samples, args.out)
    print(f"wrote {len(samples)} sequences to {out}")
    return 0


def _cmd_select(args) -> int:
    members, score = arng.select_best(args.seed, args.draws, args.ensemble_size, args.joints)
    arng.save_arrangement_set(args.out, members, N=args.draws, seed=args.seed, score=score)
    bound = arng.max_dissimilarity(args.ensemble_size, args.joints)
    print(f"wrote {args.out}: L={args.ensemble_size} M={args.joints} score={score} bound={bound}")
    return 0


def _cmd_encode(args) -> int:
    members, _ = arng.load_arrangement_set(args.arrangement)
    if args.data == "synthetic":
        seqs = []
        for class_id in range(skel.num_classes()):
            seqs += skel.synth_generate(class_id, args.per_class, args.seed)
    else:
        seqs = skel.load_dataset_dir(args.data)
    if args.limit is not None:
        seqs = seqs[: args.limit]
    if not seqs:
        raise ValueError("no sequences to encode")
    out_dir = Path(args.out)
    write = export_png if args.format == "png" else export_raw
    suffix = "." + args.format
    count = 0
    for l, arrangement in enumerate(members):
        sub = out_dir / f"arr{l:02d}"
        sub.mkdir(parents=True, exist_ok=True)
        for seq in seqs:
            img, _ = encode(skel.sample_frames(seq, args.frames), arrangement, args.frames)
            write(img, sub / (Path(seq.source_id).stem + suffix))
            count += 1
    print(f"wrote {count} images under {out_dir}")
    return 0


def _cmd_train(args) -> int:
    result = run_pipeline(_build_config(args))
    print(format_rows(result_rows(result)))
    print(f"artifacts in {result.out_dir}")
    return 0


def _cmd_eval(args) -> int:
    doc = evaluate_run(args.run, dataset=args.data, split=args.split)
    print(format_rows(doc["rows"]))
    return 0


def _cmd_ablate(args) -> int:
    sizes = [int(tok) for tok in args.ensemble_sizes.split(",") if tok.strip()]
    cfg = _build_config(args)
    results = run_ablation(cfg, sizes)
    for size, res in zip(sizes, results):
        print(
            f"L={size:3d}  average_acc={res.average.accuracy:.4f}"
            f"  consensus_acc={res.consensus.accuracy:.4f}"
        )
    print(f"summary in {cfg.out_dir}/ablation.json")
    return 0


def _cmd_compare(args) -> int:
    cfg = _build_config(args)
    comparison = compare_classifiers(cfg)
    for row in comparison["rows"]:
        print(
            f"{row['classifier']:>4} {row['kind']:<10} accuracy={row['accuracy']:.4f}"
            f" f_score={row['f_score']:.4f}"
        )
    for kind, gain in comparison["consensus_gain"].items():
        print(f"{kind:>4} consensus gain over average: {gain:+.4f}")
    return 0


def _cmd_report(args) -> int:
    doc = json.loads((Path(args.run) / "results.json").read_text())
    print(format_rows(doc["rows"]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skelrec",
        description="Skeleton action recognition with arrangement ensembles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic skeleton dataset directory")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("select", help="select a maximally dissimilar arrangement set")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--ensemble-size", type=int, default=25)
    p.add_argument("--joints", type=int, default=skel.NUM_JOINTS)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("encode", help="encode sequences to pseudo-images")
    p.add_argument("--data", required=True, help="'synthetic' or a dataset directory")
    p.add_argument("--arrangement", required=True, help="arrangement set file")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["png", "raw"], default="png")
    p.add_argument("--frames", type=int, default=skel.DEFAULT_FRAMES)
    p.add_argument("--limit", type=int)
    p.add_argument("--per-class", type=int, default=4, help="synthetic samples per class")
    p.add_argument("--seed", type=int, default=0, help="synthetic generation seed")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("train", help="run the full three-level pipeline")
    _add_run_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="re-score a finished run's checkpoints")
    p.add_argument("--run", required=True, help="run directory with manifest and checkpoints")
    p.add_argument("--data", help="override the evaluation dataset")
    p.add_argument("--split", choices=["cross_subject", "cross_view"])
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="sweep the ensemble size")
    _add_run_flags(p)
    p.add_argument("--ensemble-sizes", required=True, help="comma-separated, e.g. 10,25,40")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("compare", help="matched-seed comparison of both classifier kinds")
    _add_run_flags(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("report", help="print the metric table of a finished run")
    p.add_argument("--run", required=True)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary converts to a record
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
