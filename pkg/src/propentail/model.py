"""Siamese entailment classifier: two tied copies of one sentence encoder feed
a neural-tensor combining layer, two tanh layers, and a 7-way softmax."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Tensor,
    add,
    affine,
    bilinear_tensor_form,
    concat,
    concat_rows,
    linear_rows,
    pair_bilinear_rows,
    rows_softmax_nll_mean,
    softmax_nll,
    stack_rows,
    tanh,
)
from .datagen import Example, derive_rng
from .encoders import (
    CompiledSentence,
    EncoderConfig,
    Sentence,
    compile_sentence,
    default_encoder_config,
    encode_compiled,
    init_encoder_params,
    init_uniform,
)
from .logic import RELATION_INDEX, RELATIONS, Relation
from .params import ParamStore

NUM_RELATIONS = len(RELATIONS)

_INIT_STREAM = 100


@dataclass(frozen=True)
class ModelConfig:
    encoder: EncoderConfig
    d_c: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.d_c <= 0:
            raise ValueError("d_c must be positive")

    @property
    def kind(self) -> str:
        return self.encoder.kind

    def echo(self) -> dict:
        """All resolved settings, for reports and checkpoints."""
        return {
            "kind": self.encoder.kind,
            "d_emb": self.encoder.d_emb,
            "d_hidden": self.encoder.d_hidden,
            "d_c": self.d_c,
            "seed": self.seed,
            "vocabulary_size": len(self.encoder.vocabulary),
        }


def default_model_config(kind: str, seed: int = 0) -> ModelConfig:
    return ModelConfig(encoder=default_encoder_config(kind), seed=seed)


def init_params(config: ModelConfig, rho: float = 0.95, eps: float = 1e-6) -> ParamStore:
    """One shared encoder parameter set plus combiner and classifier layers."""
    rng = derive_rng(config.seed, _INIT_STREAM)
    store = ParamStore(rho=rho, eps=eps)
    init_encoder_params(config.encoder, store, rng)

    def uniform(shape):
        return init_uniform(rng, shape)

    d_h, d_c = config.encoder.d_hidden, config.d_c
    store.add("combine.M", uniform((d_c, 2 * d_h)))
    store.add("combine.b", np.zeros(d_c))
    store.add("combine.T", uniform((d_c, d_h, d_h)))
    store.add("mlp.W1", uniform((d_c, d_c)))
    store.add("mlp.b1", np.zeros(d_c))
    store.add("mlp.W2", uniform((d_c, d_c)))
    store.add("mlp.b2", np.zeros(d_c))
    store.add("out.W", uniform((NUM_RELATIONS, d_c)))
    store.add("out.b", np.zeros(NUM_RELATIONS))
    return store


def combine_ntn(m: Tensor, b: Tensor, t: Tensor, x_l: Tensor, x_r: Tensor) -> Tensor:
    """tanh(M [x_l; x_r] + b) + tanh(x_l T x_r)."""
    return add(tanh(affine(m, concat(x_l, x_r), b)), tanh(bilinear_tensor_form(x_l, t, x_r)))


def logits_from_encodings(store: ParamStore, x_l: Tensor, x_r: Tensor) -> Tensor:
    combined = combine_ntn(store["combine.M"], store["combine.b"], store["combine.T"], x_l, x_r)
    hidden = tanh(affine(store["mlp.W1"], combined, store["mlp.b1"]))
    hidden = tanh(affine(store["mlp.W2"], hidden, store["mlp.b2"]))
    return affine(store["out.W"], hidden, store["out.b"])


def predict_logits_compiled(
    config: ModelConfig,
    store: ParamStore,
    premise: CompiledSentence,
    hypothesis: CompiledSentence,
) -> Tensor:
    x_l = encode_compiled(config.encoder, store, premise)
    x_r = encode_compiled(config.encoder, store, hypothesis)
    return logits_from_encodings(store, x_l, x_r)


def predict_logits(
    config: ModelConfig, store: ParamStore, premise: Sentence, hypothesis: Sentence
) -> Tensor:
    """7 logits for one pair; both sides share the single encoder parameter set."""
    return predict_logits_compiled(
        config,
        store,
        compile_sentence(config.encoder, premise),
        compile_sentence(config.encoder, hypothesis),
    )


def batch_logits(
    config: ModelConfig,
    store: ParamStore,
    premises: list[CompiledSentence],
    hypotheses: list[CompiledSentence],
) -> Tensor:
    """(n, 7) logits for a batch of compiled pairs.

    Encodings are still built per example (tree shapes vary), but the combiner,
    tanh layers, and softmax projection run once per batch.  Row e equals
    predict_logits for pair e up to float rounding.
    """
    enc = config.encoder
    x_l = stack_rows([encode_compiled(enc, store, p) for p in premises])
    x_r = stack_rows([encode_compiled(enc, store, h) for h in hypotheses])
    nn = tanh(linear_rows(concat_rows(x_l, x_r), store["combine.M"], store["combine.b"]))
    bl = tanh(pair_bilinear_rows(x_l, store["combine.T"], x_r))
    hidden = tanh(linear_rows(add(nn, bl), store["mlp.W1"], store["mlp.b1"]))
    hidden = tanh(linear_rows(hidden, store["mlp.W2"], store["mlp.b2"]))
    return linear_rows(hidden, store["out.W"], store["out.b"])


def batch_nll(
    config: ModelConfig,
    store: ParamStore,
    premises: list[CompiledSentence],
    hypotheses: list[CompiledSentence],
    targets: list[int],
) -> Tensor:
    """Mean negative log likelihood over a batch of compiled pairs."""
    return rows_softmax_nll_mean(batch_logits(config, store, premises, hypotheses), targets)


def example_loss(config: ModelConfig, store: ParamStore, example: Example) -> Tensor:
    """Negative log likelihood of the gold relation (regularization is added
    once per minibatch, not here)."""
    logits = predict_logits(config, store, example.premise, example.hypothesis)
    return softmax_nll(logits, RELATION_INDEX[example.label])


def predict(
    config: ModelConfig, store: ParamStore, premise: Sentence, hypothesis: Sentence
) -> Relation:
    """Argmax relation; exact ties resolve to the lowest canonical index."""
    logits = predict_logits(config, store, premise, hypothesis)
    return RELATIONS[int(np.argmax(logits.data))]
