"""Minibatch AdaDelta training, per-bin evaluation, cutoff experiments,
learning curves, and the most-frequent-class baseline."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .autodiff import add, backward
from .datagen import (
    _CURVE_STREAM,
    _SWEEP_STREAM,
    _TRAIN_STREAM,
    DatasetSplit,
    Example,
    class_distribution,
    derive_rng,
    training_subset,
)
from .encoders import compile_sentence
from .logic import RELATION_INDEX, RELATIONS, Relation
from .model import ModelConfig, batch_logits, batch_nll, init_params
from .params import ParamStore, adadelta_step, l2_penalty

NUM_RELATIONS = len(RELATIONS)


class EmptyDatasetError(ValueError):
    pass


class NonFiniteLossError(RuntimeError):
    def __init__(self, epoch: int, batch: int, detail: str):
        super().__init__(f"non-finite {detail} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class SizeExceedsAvailable(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    l2: float = 1e-4
    seed: int = 0
    rho: float = 0.95
    eps: float = 1e-6
    shuffle: bool = True
    best_epoch_snapshot: bool = False  # default: report final-epoch parameters

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")

    def echo(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "l2": self.l2,
            "train_seed": self.seed,
            "rho": self.rho,
            "eps": self.eps,
            "shuffle": self.shuffle,
            "best_epoch_snapshot": self.best_epoch_snapshot,
        }


@dataclass
class TrainResult:
    store: ParamStore
    history: list[float]
    snapshot_epoch: int


@dataclass
class EvalReport:
    model_kind: str
    cutoff: int | None
    per_bin_accuracy: dict[int, float]
    per_bin_counts: dict[int, int]
    bin0_accuracy: float | None
    bin0_count: int
    overall_accuracy: float
    train_accuracy: float
    confusion: list[list[int]]  # gold relation x predicted relation
    history: list[float]
    config: dict = field(default_factory=dict)

    def accuracy_over_bins(self, bins) -> float:
        """Example-weighted accuracy over a subset of the headline bins."""
        correct = 0.0
        total = 0
        for b in bins:
            n = self.per_bin_counts.get(b, 0)
            correct += self.per_bin_accuracy.get(b, 0.0) * n
            total += n
        return correct / total if total else 0.0


@dataclass
class ExperimentResult:
    report: EvalReport
    store: ParamStore


@dataclass
class BaselineReport:
    majority: Relation
    per_bin_accuracy: dict[int, float]
    per_bin_counts: dict[int, int]
    overall_accuracy: float
    train_accuracy: float

    def accuracy_over_bins(self, bins) -> float:
        correct = 0.0
        total = 0
        for b in bins:
            n = self.per_bin_counts.get(b, 0)
            correct += self.per_bin_accuracy.get(b, 0.0) * n
            total += n
        return correct / total if total else 0.0


def _compile_examples(config: ModelConfig, examples: list[Example]):
    enc = config.encoder
    return [
        (
            compile_sentence(enc, ex.premise),
            compile_sentence(enc, ex.hypothesis),
            RELATION_INDEX[ex.label],
            ex.bin,
        )
        for ex in examples
    ]


def train(
    model_config: ModelConfig,
    examples: list[Example],
    train_config: TrainConfig = TrainConfig(),
    progress: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Train a fresh model; returns the parameters and per-epoch mean loss.

    Each minibatch optimizes mean NLL over the batch plus one L2 term; the
    recorded epoch loss is the example-weighted mean of batch objectives.
    """
    if not examples:
        raise EmptyDatasetError("training set is empty")
    store = init_params(model_config, rho=train_config.rho, eps=train_config.eps)
    compiled = _compile_examples(model_config, examples)
    rng = derive_rng(train_config.seed, _TRAIN_STREAM)
    n = len(compiled)
    history: list[float] = []
    best_loss = np.inf
    snapshot_epoch = train_config.epochs - 1
    snapshot: dict[str, np.ndarray] | None = None

    for epoch in range(train_config.epochs):
        order = rng.permutation(n) if train_config.shuffle else np.arange(n)
        epoch_loss = 0.0
        for batch_index, start in enumerate(range(0, n, train_config.batch_size)):
            batch = [compiled[i] for i in order[start : start + train_config.batch_size]]
            objective = batch_nll(
                model_config,
                store,
                [b[0] for b in batch],
                [b[1] for b in batch],
                [b[2] for b in batch],
            )
            if train_config.l2 > 0:
                objective = add(objective, l2_penalty(store, train_config.l2))
            value = float(objective.data)
            if not np.isfinite(value):
                raise NonFiniteLossError(epoch, batch_index, "loss")
            backward(objective)
            adadelta_step(store)
            store.zero_grad()
            epoch_loss += value * len(batch)
        if not store.all_finite():
            raise NonFiniteLossError(epoch, -1, "parameter")
        mean_loss = epoch_loss / n
        history.append(mean_loss)
        if progress is not None:
            progress(epoch, mean_loss)
        if train_config.best_epoch_snapshot and mean_loss < best_loss:
            best_loss = mean_loss
            snapshot_epoch = epoch
            snapshot = {name: t.data.copy() for name, t in store.params.items()}

    if train_config.best_epoch_snapshot and snapshot is not None:
        for name, values in snapshot.items():
            store.params[name].data = values
    return TrainResult(store=store, history=history, snapshot_epoch=snapshot_epoch)


_EVAL_CHUNK = 256  # bounds the (chunk, d*d) scratch of the batched combiner


def _predict_indices(
    model_config: ModelConfig,
    store: ParamStore,
    compiled,
    threads: int = 1,
) -> list[int]:
    """Argmax relation index per compiled example, in input order."""

    def predict_chunk(chunk):
        logits = batch_logits(
            model_config, store, [c[0] for c in chunk], [c[1] for c in chunk]
        )
        return [int(i) for i in np.argmax(logits.data, axis=1)]

    chunks = [compiled[i : i + _EVAL_CHUNK] for i in range(0, len(compiled), _EVAL_CHUNK)]
    if threads > 1 and len(chunks) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(predict_chunk, chunks))
    else:
        parts = [predict_chunk(chunk) for chunk in chunks]
    return [idx for part in parts for idx in part]


def accuracy(model_config: ModelConfig, store: ParamStore, examples: list[Example]) -> float:
    if not examples:
        return 0.0
    compiled = _compile_examples(model_config, examples)
    predicted = _predict_indices(model_config, store, compiled)
    gold = [c[2] for c in compiled]
    return sum(p == g for p, g in zip(predicted, gold)) / len(examples)


def evaluate_by_bin(
    model_config: ModelConfig,
    store: ParamStore,
    test_examples: list[Example],
    threads: int = 1,
) -> EvalReport:
    """Per-bin accuracy and confusion counts; never mutates parameters.

    Bins 1..12 make the headline numbers; bin 0 is kept out of the aggregate
    and reported on the side.
    """
    if not test_examples:
        raise EmptyDatasetError("test set is empty")
    compiled = _compile_examples(model_config, test_examples)
    predicted = _predict_indices(model_config, store, compiled, threads=threads)

    per_bin_correct: dict[int, int] = {}
    per_bin_total: dict[int, int] = {}
    confusion = [[0] * NUM_RELATIONS for _ in range(NUM_RELATIONS)]
    bin0_correct = 0
    bin0_total = 0
    for (prem, hyp, gold, bin_index), pred in zip(compiled, predicted):
        if bin_index == 0:
            bin0_total += 1
            bin0_correct += pred == gold
            continue
        per_bin_total[bin_index] = per_bin_total.get(bin_index, 0) + 1
        per_bin_correct[bin_index] = per_bin_correct.get(bin_index, 0) + (pred == gold)
        confusion[gold][pred] += 1

    per_bin_accuracy = {
        b: per_bin_correct[b] / per_bin_total[b] for b in sorted(per_bin_total)
    }
    total = sum(per_bin_total.values())
    overall = sum(per_bin_correct.values()) / total if total else 0.0
    return EvalReport(
        model_kind=model_config.kind,
        cutoff=None,
        per_bin_accuracy=per_bin_accuracy,
        per_bin_counts={b: per_bin_total[b] for b in sorted(per_bin_total)},
        bin0_accuracy=(bin0_correct / bin0_total) if bin0_total else None,
        bin0_count=bin0_total,
        overall_accuracy=overall,
        train_accuracy=0.0,
        confusion=confusion,
        history=[],
    )


def run_experiment(
    cutoff: int,
    split: DatasetSplit,
    model_config: ModelConfig,
    train_config: TrainConfig = TrainConfig(),
    threads: int = 1,
    progress: Callable[[int, float], None] | None = None,
) -> ExperimentResult:
    """Train on bins <= cutoff, evaluate on the test side of every bin >= 1."""
    train_examples = training_subset(split, cutoff)
    result = train(model_config, train_examples, train_config, progress=progress)
    report = evaluate_by_bin(model_config, result.store, split.test, threads=threads)
    report.cutoff = cutoff
    report.train_accuracy = accuracy(model_config, result.store, train_examples)
    report.history = result.history
    # A converged model that cannot beat the majority class on its own
    # training set has not actually learned; flag the run as degenerate.
    majority_share = max(class_distribution(train_examples).values()) / len(train_examples)
    report.config = {
        **model_config.echo(),
        **train_config.echo(),
        "cutoff": cutoff,
        "train_examples": len(train_examples),
        "test_examples": len(split.test),
        "snapshot_epoch": result.snapshot_epoch,
        "degenerate_fit": report.train_accuracy <= majority_share,
    }
    return ExperimentResult(report=report, store=result.store)


def learning_curve(
    model_config: ModelConfig,
    split: DatasetSplit,
    cutoff: int,
    sizes: list[int],
    train_config: TrainConfig = TrainConfig(),
    threads: int = 1,
) -> list[tuple[int, float]]:
    """Overall test accuracy (bins 1..12) per training-set size.

    Subsets are seeded draws that preserve the original example order, so the
    full size reproduces the plain experiment exactly.
    """
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    full = training_subset(split, cutoff)
    points: list[tuple[int, float]] = []
    for size in sizes:
        if size > len(full):
            raise SizeExceedsAvailable(f"size {size} exceeds available {len(full)}")
        rng = derive_rng(train_config.seed, _CURVE_STREAM, size)
        chosen = np.sort(rng.permutation(len(full))[:size])
        subset = [full[i] for i in chosen]
        result = train(model_config, subset, train_config)
        report = evaluate_by_bin(model_config, result.store, split.test, threads=threads)
        points.append((size, report.overall_accuracy))
    return points


def baseline_most_frequent(
    train_examples: list[Example], test_examples: list[Example]
) -> BaselineReport:
    """Predict the training majority relation everywhere.

    Ties break to the lowest canonical relation index.
    """
    if not train_examples:
        raise EmptyDatasetError("baseline needs a nonempty training set")
    counts = class_distribution(train_examples)
    majority = max(RELATIONS, key=lambda r: (counts[r], -RELATION_INDEX[r]))
    per_bin_total: dict[int, int] = {}
    per_bin_correct: dict[int, int] = {}
    for ex in test_examples:
        if ex.bin == 0:
            continue
        per_bin_total[ex.bin] = per_bin_total.get(ex.bin, 0) + 1
        per_bin_correct[ex.bin] = per_bin_correct.get(ex.bin, 0) + (ex.label == majority)
    total = sum(per_bin_total.values())
    return BaselineReport(
        majority=majority,
        per_bin_accuracy={
            b: per_bin_correct[b] / per_bin_total[b] for b in sorted(per_bin_total)
        },
        per_bin_counts={b: per_bin_total[b] for b in sorted(per_bin_total)},
        overall_accuracy=(sum(per_bin_correct.values()) / total) if total else 0.0,
        train_accuracy=counts[majority] / len(train_examples),
    )


def sweep_l2(
    model_config: ModelConfig,
    examples: list[Example],
    train_config: TrainConfig,
    candidates: tuple[float, ...] = (1e-3, 1e-4, 1e-5),
    holdout_fraction: float = 0.2,
) -> tuple[float, dict[float, float]]:
    """Pick an L2 strength on a held-out slice of the training side.

    Returns the winning candidate (ties break to the earliest) and the
    holdout accuracy per candidate.
    """
    if not 0 < holdout_fraction < 1:
        raise ValueError("holdout_fraction must be in (0, 1)")
    if len(examples) < 2:
        raise EmptyDatasetError("sweep needs at least two examples")
    rng = derive_rng(train_config.seed, _SWEEP_STREAM)
    order = rng.permutation(len(examples))
    cut = int(np.floor(len(examples) * (1 - holdout_fraction)))
    fit = [examples[i] for i in order[:cut]]
    held = [examples[i] for i in order[cut:]]
    scores: dict[float, float] = {}
    for lam in candidates:
        result = train(model_config, fit, replace(train_config, l2=lam))
        scores[lam] = accuracy(model_config, result.store, held)
    best = max(candidates, key=lambda lam: scores[lam])
    return best, scores
