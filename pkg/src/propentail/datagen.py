"""Sampling of random formulas, labeled pair generation, splits, and TSV I/O.

Randomness comes from numpy's PCG64 generator; every stream is derived from a
user seed plus a fixed purpose tag via SeedSequence, so per-bin generation is
reproducible and safely parallelizable.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .logic import (
    NUM_VARIABLES,
    RELATIONS,
    Bin,
    Formula,
    FormulaSyntaxError,
    Not,
    Relation,
    Var,
    connective_count,
    parse,
    relation_of_pair,
    render,
    tokenize,
)

MAX_BIN = 12

# Ordered (premise, hypothesis) pairs of bare variables: the whole bin-0 space.
BIN0_PAIR_SPACE = NUM_VARIABLES * NUM_VARIABLES

# Stream tags for SeedSequence([seed, tag, ...]) derivation.
_GEN_STREAM = 0
_SPLIT_STREAM = 1
_TRAIN_STREAM = 2
_CURVE_STREAM = 3
_SWEEP_STREAM = 4


class GenerationExhausted(RuntimeError):
    def __init__(self, bin_index: int, requested: int, found: int):
        super().__init__(
            f"bin {bin_index}: could not generate {requested} distinct pairs "
            f"(found {found})"
        )
        self.bin_index = bin_index
        self.requested = requested
        self.found = found


class DatasetParseError(ValueError):
    def __init__(self, line_number: int, line: str, reason: str):
        super().__init__(f"line {line_number}: {reason}: {line!r}")
        self.line_number = line_number
        self.line = line
        self.reason = reason


class SizeExceedsAvailable(ValueError):
    pass


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """PCG64 stream for (seed, purpose tag, ...); fixed across platforms."""
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


@dataclass(frozen=True)
class Example:
    premise: Formula
    hypothesis: Formula
    label: Relation
    bin: int


def make_example(premise: Formula, hypothesis: Formula) -> Example:
    return Example(
        premise=premise,
        hypothesis=hypothesis,
        label=relation_of_pair(premise, hypothesis),
        bin=max(connective_count(premise), connective_count(hypothesis)),
    )


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    per_bin_pairs: int = 1000
    max_bin: int = MAX_BIN
    negation_probability: float = 1 / 3
    dedupe: bool = True
    # With dedupe on, bin 0 has only 36 distinct ordered pairs.  By default the
    # generator caps bin 0 at the full space so the stock dataset is always
    # producible; strict mode raises GenerationExhausted instead.
    strict_bin_counts: bool = False

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.per_bin_pairs <= 0:
            raise ValueError("per_bin_pairs must be positive")
        if not 0 <= self.max_bin <= MAX_BIN:
            raise ValueError(f"max_bin must be in 0..{MAX_BIN}")
        if not 0 < self.negation_probability < 1:
            raise ValueError("negation_probability must be in (0, 1)")


@dataclass(frozen=True)
class DatasetSplit:
    train: list[Example]
    test: list[Example]
    split_fraction: float
    seed: int


def sample_formula(
    rng: np.random.Generator, k: int, negation_probability: float = 1 / 3
) -> Formula:
    """Random formula with exactly k connectives.

    Draw order (fixed for reproducibility): negation coin, then operator coin,
    then the split point, then the left subtree, then the right subtree.
    """
    if k < 0:
        raise ValueError("connective count must be non-negative")
    if k == 0:
        return Var(int(rng.integers(1, NUM_VARIABLES + 1)))
    if rng.random() < negation_probability:
        return Not(sample_formula(rng, k - 1, negation_probability))
    op = "and" if rng.random() < 0.5 else "or"
    left_k = int(rng.integers(0, k))
    left = sample_formula(rng, left_k, negation_probability)
    right = sample_formula(rng, k - 1 - left_k, negation_probability)
    return Bin(op, left, right)


def generate_bin(config: GenConfig, bin_index: int) -> list[Example]:
    """All examples for one bin, on its own derived random stream."""
    rng = derive_rng(config.seed, _GEN_STREAM, bin_index)
    target = config.per_bin_pairs
    if config.dedupe and bin_index == 0 and target > BIN0_PAIR_SPACE:
        if config.strict_bin_counts:
            raise GenerationExhausted(0, target, BIN0_PAIR_SPACE)
        target = BIN0_PAIR_SPACE
    attempt_budget = 200 * target + 10_000
    seen: set[tuple[str, str]] = set()
    examples: list[Example] = []
    attempts = 0
    while len(examples) < target:
        if attempts >= attempt_budget:
            raise GenerationExhausted(bin_index, target, len(examples))
        attempts += 1
        force_premise = rng.random() < 0.5
        other_k = int(rng.integers(0, bin_index + 1))
        premise_k = bin_index if force_premise else other_k
        hypothesis_k = other_k if force_premise else bin_index
        premise = sample_formula(rng, premise_k, config.negation_probability)
        hypothesis = sample_formula(rng, hypothesis_k, config.negation_probability)
        if config.dedupe:
            key = (render(premise), render(hypothesis))
            if key in seen:
                continue
            seen.add(key)
        examples.append(make_example(premise, hypothesis))
    return examples


def generate_pairs(config: GenConfig, threads: int = 1) -> list[Example]:
    """Examples for every bin 0..max_bin, in bin order.

    Bins use independent random streams, so the result is identical whether
    bins are generated serially or on worker threads.
    """
    bins = range(config.max_bin + 1)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_bin = list(pool.map(lambda b: generate_bin(config, b), bins))
    else:
        per_bin = [generate_bin(config, b) for b in bins]
    examples: list[Example] = []
    for bin_examples in per_bin:
        examples.extend(bin_examples)
    return examples


def split_dataset(
    examples: list[Example], fraction: float = 0.8, seed: int = 0
) -> DatasetSplit:
    """Per-bin shuffled split; the train side takes floor(n * fraction)."""
    if not 0 < fraction < 1:
        raise ValueError("split fraction must be in (0, 1)")
    by_bin: dict[int, list[Example]] = {}
    for ex in examples:
        by_bin.setdefault(ex.bin, []).append(ex)
    train: list[Example] = []
    test: list[Example] = []
    for bin_index in sorted(by_bin):
        bin_examples = by_bin[bin_index]
        rng = derive_rng(seed, _SPLIT_STREAM, bin_index)
        order = rng.permutation(len(bin_examples))
        cut = int(np.floor(len(bin_examples) * fraction))
        train.extend(bin_examples[i] for i in order[:cut])
        test.extend(bin_examples[i] for i in order[cut:])
    return DatasetSplit(train=train, test=test, split_fraction=fraction, seed=seed)


def training_subset(split: DatasetSplit, cutoff: int) -> list[Example]:
    """Train-side examples whose bin does not exceed the cutoff."""
    if cutoff < 0:
        raise ValueError("cutoff must be non-negative")
    return [ex for ex in split.train if ex.bin <= cutoff]


def write_dataset(examples: list[Example], path: str | Path) -> None:
    """One example per line: label TAB premise TAB hypothesis."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(f"{ex.label.label}\t{render(ex.premise)}\t{render(ex.hypothesis)}\n")


def read_dataset(path: str | Path) -> list[Example]:
    examples: list[Example] = []
    with open(path, encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise DatasetParseError(line_number, line, "expected 3 tab-separated fields")
            label_text, premise_text, hypothesis_text = fields
            try:
                label = Relation.from_label(label_text)
                premise = parse(tokenize(premise_text))
                hypothesis = parse(tokenize(hypothesis_text))
            except (ValueError, FormulaSyntaxError) as err:
                raise DatasetParseError(line_number, line, str(err)) from err
            examples.append(
                Example(
                    premise=premise,
                    hypothesis=hypothesis,
                    label=label,
                    bin=max(connective_count(premise), connective_count(hypothesis)),
                )
            )
    return examples


def class_distribution(examples: list[Example]) -> dict[Relation, int]:
    counts = Counter(ex.label for ex in examples)
    return {r: counts.get(r, 0) for r in RELATIONS}


def majority_fraction(examples: list[Example]) -> float:
    if not examples:
        return 0.0
    counts = class_distribution(examples)
    return max(counts.values()) / len(examples)


def audit_dataset(path: str | Path) -> list[str]:
    """Recompute every label and bin; return a description of each mismatch."""
    problems: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                problems.append(f"{path}:{line_number}: expected 3 fields: {line!r}")
                continue
            label_text, premise_text, hypothesis_text = fields
            try:
                label = Relation.from_label(label_text)
                premise = parse(tokenize(premise_text))
                hypothesis = parse(tokenize(hypothesis_text))
            except (ValueError, FormulaSyntaxError) as err:
                problems.append(f"{path}:{line_number}: unparseable: {err}")
                continue
            oracle = relation_of_pair(premise, hypothesis)
            if oracle != label:
                problems.append(
                    f"{path}:{line_number}: label {label.label!r} but oracle says "
                    f"{oracle.label!r}: {line!r}"
                )
            bin_index = max(connective_count(premise), connective_count(hypothesis))
            if bin_index > MAX_BIN:
                problems.append(
                    f"{path}:{line_number}: bin {bin_index} exceeds {MAX_BIN}: {line!r}"
                )
    return problems
