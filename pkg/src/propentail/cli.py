"""Command-line entry point: data generation, training, evaluation, the
cutoff experiments, learning curves, and dataset auditing.

Every subcommand is deterministic given its flags; the fully resolved
configuration is echoed to stderr and embedded in the written reports.
Diagnostics go to stderr, data to files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import datagen, reports, training
from .datagen import GenConfig, read_dataset, split_dataset, write_dataset
from .encoders import EncoderConfig, default_encoder_config
from .model import ModelConfig, predict
from .params import load_checkpoint, save_checkpoint
from .training import TrainConfig

MODEL_CHOICES = ("treernn", "treerntn", "treelstm", "lstm", "nbow", "rnn")


def _echo(config: dict) -> None:
    print(json.dumps(config, sort_keys=True), file=sys.stderr)


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _build_model_config(args) -> ModelConfig:
    encoder = default_encoder_config(args.model)
    if args.d_emb or args.d_hidden:
        d_emb = args.d_emb or encoder.d_emb
        d_hidden = args.d_hidden or encoder.d_hidden
        if args.model in ("treernn", "treerntn"):
            d_hidden = d_hidden if args.d_hidden else d_emb
        encoder = EncoderConfig(kind=args.model, d_emb=d_emb, d_hidden=d_hidden)
    return ModelConfig(encoder=encoder, d_c=args.d_c, seed=args.seed)


def _build_train_config(args, l2: float | None = None) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        l2=args.l2 if l2 is None else l2,
        seed=args.seed,
        rho=args.rho,
        eps=args.eps,
        best_epoch_snapshot=getattr(args, "best_epoch", False),
    )


def _load_split(data_dir: str, split_fraction: float = 0.8):
    # The split was fixed when the files were written; the seed recorded here
    # is not used again.
    return datagen.DatasetSplit(
        train=read_dataset(Path(data_dir) / "train.tsv"),
        test=read_dataset(Path(data_dir) / "test.tsv"),
        split_fraction=split_fraction,
        seed=0,
    )


def cmd_gen(args) -> int:
    config = GenConfig(
        seed=args.seed,
        per_bin_pairs=args.per_bin,
        max_bin=args.max_bin,
        negation_probability=args.negation_prob,
        dedupe=not args.no_dedupe,
    )
    echo = {
        "command": "gen",
        "seed": config.seed,
        "per_bin_pairs": config.per_bin_pairs,
        "max_bin": config.max_bin,
        "negation_probability": config.negation_probability,
        "dedupe": config.dedupe,
        "split": args.split,
        "out_dir": args.out_dir,
        "threads": args.threads,
    }
    _echo(echo)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    examples = datagen.generate_pairs(config, threads=args.threads)
    split = split_dataset(examples, fraction=args.split, seed=args.seed)
    write_dataset(split.train, out_dir / "train.tsv")
    write_dataset(split.test, out_dir / "test.tsv")

    def bin_counts(xs):
        counts: dict[int, int] = {}
        for ex in xs:
            counts[ex.bin] = counts.get(ex.bin, 0) + 1
        return counts

    stats = reports.dataset_stats_markdown(
        echo,
        bin_counts(split.train),
        bin_counts(split.test),
        datagen.class_distribution(examples),
        datagen.majority_fraction(examples),
    )
    reports.write_text(out_dir / "stats.md", stats)
    _log(
        f"wrote {len(split.train)} train / {len(split.test)} test examples to {out_dir}"
    )
    return 0


def cmd_train(args) -> int:
    model_config = _build_model_config(args)
    train_config = _build_train_config(args)
    echo = {"command": "train", "train_file": args.train_file, "cutoff": args.cutoff,
            **model_config.echo(), **train_config.echo()}
    _echo(echo)
    examples = read_dataset(args.train_file)
    if args.cutoff is not None:
        examples = [ex for ex in examples if ex.bin <= args.cutoff]
    result = training.train(
        model_config,
        examples,
        train_config,
        progress=lambda e, loss: _log(f"epoch {e + 1}/{train_config.epochs}: loss {loss:.4f}"),
    )
    save_checkpoint(args.checkpoint, result.store, echo)
    _log(f"saved checkpoint to {args.checkpoint}")
    return 0


def cmd_eval(args) -> int:
    store, config = load_checkpoint(args.checkpoint)
    kind = config["kind"]
    encoder = EncoderConfig(kind=kind, d_emb=config["d_emb"], d_hidden=config["d_hidden"])
    model_config = ModelConfig(encoder=encoder, d_c=config["d_c"], seed=config.get("seed", 0))
    echo = {"command": "eval", "checkpoint": args.checkpoint, "data": args.data,
            **model_config.echo()}
    _echo(echo)
    examples = read_dataset(args.data)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    predictions_path = out_dir / "predictions.tsv"
    with open(predictions_path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            predicted = predict(model_config, store, ex.premise, ex.hypothesis)
            fh.write(f"{ex.label.label}\t{predicted.label}\n")
    report = training.evaluate_by_bin(model_config, store, examples, threads=args.threads)
    report.config = echo
    reports.write_text(out_dir / "report.csv", reports.report_csv_text(report))
    reports.write_text(out_dir / "report.md", reports.report_markdown_text(report))
    _log(f"overall accuracy (bins 1-12): {report.overall_accuracy:.4f}")
    _log(f"wrote {predictions_path} and reports to {out_dir}")
    return 0


def cmd_experiment(args) -> int:
    model_config = _build_model_config(args)
    split = _load_split(args.data_dir)
    l2 = args.l2
    l2_source = "flag-or-default"
    if args.sweep_l2:
        candidates = (1e-3, 1e-4, 1e-5)
        base = _build_train_config(args)
        l2, scores = training.sweep_l2(
            model_config, datagen.training_subset(split, args.cutoff), base, candidates
        )
        l2_source = "sweep"
        _log(f"l2 sweep: {scores} -> {l2}")
    train_config = _build_train_config(args, l2=l2)
    echo = {
        "command": "experiment",
        "data_dir": args.data_dir,
        "cutoff": args.cutoff,
        "l2_source": l2_source,
        "threads": args.threads,
        **model_config.echo(),
        **train_config.echo(),
    }
    _echo(echo)
    result = training.run_experiment(
        args.cutoff,
        split,
        model_config,
        train_config,
        threads=args.threads,
        progress=lambda e, loss: _log(
            f"epoch {e + 1}/{train_config.epochs}: loss {loss:.4f}"
        ),
    )
    report = result.report
    report.config = {**report.config, "l2_source": l2_source}
    baseline = training.baseline_most_frequent(
        datagen.training_subset(split, args.cutoff), split.test
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{args.model}_cutoff{args.cutoff}"
    reports.write_text(out_dir / f"{stem}_report.csv", reports.report_csv_text(report))
    reports.write_text(out_dir / f"{stem}_plot.csv", reports.plot_csv_text(report))
    reports.write_text(
        out_dir / f"{stem}_report.md", reports.report_markdown_text(report, baseline)
    )
    save_checkpoint(out_dir / f"{stem}_checkpoint.npz", result.store, report.config)
    _log(
        f"train acc {report.train_accuracy:.4f}, "
        f"test overall (bins 1-12) {report.overall_accuracy:.4f}"
    )
    return 0


def cmd_curve(args) -> int:
    model_config = _build_model_config(args)
    train_config = _build_train_config(args)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    echo = {
        "command": "curve",
        "data_dir": args.data_dir,
        "cutoff": args.cutoff,
        "sizes": sizes,
        **model_config.echo(),
        **train_config.echo(),
    }
    _echo(echo)
    split = _load_split(args.data_dir)
    points = training.learning_curve(
        model_config, split, args.cutoff, sizes, train_config, threads=args.threads
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{args.model}_cutoff{args.cutoff}_curve.csv"
    reports.write_text(path, reports.curve_csv_text(points))
    for size, acc in points:
        _log(f"size {size}: accuracy {acc:.4f}")
    _log(f"wrote {path}")
    return 0


def cmd_audit(args) -> int:
    _echo({"command": "audit", "data_dir": args.data_dir})
    problems: list[str] = []
    found_any = False
    for name in ("train.tsv", "test.tsv"):
        path = Path(args.data_dir) / name
        if path.exists():
            found_any = True
            problems.extend(datagen.audit_dataset(path))
    if not found_any:
        _log(f"no train.tsv/test.tsv under {args.data_dir}")
        return 1
    if problems:
        for problem in problems:
            _log(problem)
        _log(f"audit FAILED: {len(problems)} problem(s)")
        return 1
    _log("audit passed: all labels and bins verified against the oracle")
    return 0


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, choices=MODEL_CHOICES,
                   help="sentence encoder kind ('rnn' is an optional extra; it underfits)")
    p.add_argument("--d-emb", type=int, default=0, help="embedding size (0 = stock)")
    p.add_argument("--d-hidden", type=int, default=0, help="encoder state size (0 = stock)")
    p.add_argument("--d-c", type=int, default=64, help="classifier width")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--rho", type=float, default=0.95, help="optimizer decay rate")
    p.add_argument("--eps", type=float, default=1e-6, help="optimizer stabilizer")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="propentail",
        description="Propositional-logic entailment data and sentence-encoder experiments",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="generate a dataset with exact oracle labels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-bin", type=int, default=1000, dest="per_bin")
    p.add_argument("--max-bin", type=int, default=12, dest="max_bin")
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--negation-prob", type=float, default=1 / 3)
    p.add_argument("--no-dedupe", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train one model on a TSV file")
    _add_model_flags(p)
    p.add_argument("--train-file", required=True)
    p.add_argument("--cutoff", type=int, default=None,
                   help="keep only training bins <= cutoff")
    p.add_argument("--best-epoch", action="store_true",
                   help="report the epoch with the best training objective")
    p.add_argument("--checkpoint", required=True, help="output checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a TSV file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="cutoff experiment with per-bin report")
    _add_model_flags(p)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--cutoff", type=int, required=True, choices=(0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12),
                   help="largest training bin (the classic settings are 3, 4, and 6)")
    p.add_argument("--sweep-l2", action="store_true",
                   help="pick l2 on a held-out training slice before the run")
    p.add_argument("--best-epoch", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("curve", help="learning curve over training-set sizes")
    _add_model_flags(p)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--cutoff", type=int, default=6)
    p.add_argument("--sizes", required=True, help="comma-separated sizes, ascending")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("audit", help="recompute every label via the oracle")
    p.add_argument("--data-dir", required=True)
    p.set_defaults(func=cmd_audit)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        datagen.GenerationExhausted,
        datagen.DatasetParseError,
        training.NonFiniteLossError,
        training.EmptyDatasetError,
        training.SizeExceedsAvailable,
        FileNotFoundError,
        OSError,
        ValueError,
    ) as err:
        _log(f"error: {err}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
