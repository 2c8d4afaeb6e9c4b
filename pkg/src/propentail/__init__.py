"""Artificial propositional-logic entailment: exact-oracle data generation,
tree and sequence sentence encoders over a minimal reverse-mode autodiff
engine, and the structure-generalization experiments built on them."""

from .datagen import (
    DatasetSplit,
    Example,
    GenConfig,
    GenerationExhausted,
    generate_pairs,
    make_example,
    read_dataset,
    sample_formula,
    split_dataset,
    training_subset,
    write_dataset,
)
from .encoders import EncoderConfig, default_encoder_config, encode
from .logic import (
    Bin,
    Formula,
    Not,
    Relation,
    TruthSet,
    Var,
    connective_count,
    parse,
    parse_sentence,
    relation,
    relation_of_pair,
    render,
    render_tokens,
    satisfying_set,
    tokenize,
)
from .model import ModelConfig, default_model_config, init_params, predict, predict_logits
from .params import ParamStore, gradient_check, load_checkpoint, save_checkpoint
from .training import (
    EvalReport,
    TrainConfig,
    baseline_most_frequent,
    evaluate_by_bin,
    learning_curve,
    run_experiment,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Bin",
    "DatasetSplit",
    "EncoderConfig",
    "EvalReport",
    "Example",
    "Formula",
    "GenConfig",
    "GenerationExhausted",
    "ModelConfig",
    "Not",
    "ParamStore",
    "Relation",
    "TrainConfig",
    "TruthSet",
    "Var",
    "baseline_most_frequent",
    "connective_count",
    "default_encoder_config",
    "default_model_config",
    "encode",
    "evaluate_by_bin",
    "generate_pairs",
    "gradient_check",
    "init_params",
    "learning_curve",
    "load_checkpoint",
    "make_example",
    "parse",
    "parse_sentence",
    "predict",
    "predict_logits",
    "read_dataset",
    "relation",
    "relation_of_pair",
    "render",
    "render_tokens",
    "run_experiment",
    "sample_formula",
    "satisfying_set",
    "save_checkpoint",
    "split_dataset",
    "tokenize",
    "train",
    "training_subset",
    "write_dataset",
]
