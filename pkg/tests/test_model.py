"""Siamese classifier tests: combiner, logits, loss, prediction, tied weights."""

import math

import numpy as np
import pytest

from propentail.autodiff import backward, constant, softmax_nll
from propentail.datagen import GenConfig, generate_pairs, make_example
from propentail.encoders import EncoderConfig
from propentail.logic import RELATION_INDEX, RELATIONS, Relation, Var, parse_sentence
from propentail.model import (
    ModelConfig,
    combine_ntn,
    default_model_config,
    example_loss,
    init_params,
    predict,
    predict_logits,
)
from propentail.params import gradient_check


def small_model(kind: str, seed: int = 0, d: int = 4, d_c: int = 5) -> ModelConfig:
    if kind in ("treernn", "treerntn"):
        enc = EncoderConfig(kind, d_emb=d, d_hidden=d)
    else:
        enc = EncoderConfig(kind, d_emb=d, d_hidden=d + 1)
    return ModelConfig(encoder=enc, d_c=d_c, seed=seed)


class TestCombineNtn:
    def test_zero_tensor_is_pure_nn(self):
        rng = np.random.default_rng(0)
        d_h, d_c = 3, 4
        m = rng.normal(size=(d_c, 2 * d_h))
        b = rng.normal(size=d_c)
        x_l, x_r = rng.normal(size=d_h), rng.normal(size=d_h)
        out = combine_ntn(
            constant(m),
            constant(b),
            constant(np.zeros((d_c, d_h, d_h))),
            constant(x_l),
            constant(x_r),
        )
        np.testing.assert_allclose(
            out.data, np.tanh(m @ np.concatenate([x_l, x_r]) + b), rtol=1e-12
        )

    def test_all_zero_params(self):
        d_h, d_c = 3, 4
        out = combine_ntn(
            constant(np.zeros((d_c, 2 * d_h))),
            constant(np.zeros(d_c)),
            constant(np.zeros((d_c, d_h, d_h))),
            constant(np.ones(d_h)),
            constant(np.ones(d_h)),
        )
        np.testing.assert_array_equal(out.data, np.zeros(d_c))

    def test_output_bounded_by_two(self):
        rng = np.random.default_rng(1)
        d_h, d_c = 4, 3
        out = combine_ntn(
            constant(rng.normal(size=(d_c, 2 * d_h)) * 5),
            constant(rng.normal(size=d_c) * 5),
            constant(rng.normal(size=(d_c, d_h, d_h)) * 5),
            constant(rng.normal(size=d_h)),
            constant(rng.normal(size=d_h)),
        )
        assert np.all(np.abs(out.data) < 2.0)


class TestPredictLogits:
    def test_seven_logits(self):
        config = small_model("treernn")
        store = init_params(config)
        logits = predict_logits(config, store, Var(1), Var(2))
        assert logits.shape == (7,)

    def test_swap_changes_logits(self):
        config = small_model("treernn", seed=3)
        store = init_params(config)
        premise = parse_sentence("( not p3 )")
        hypothesis = parse_sentence("( p1 ( or p2 ) )")
        ab = predict_logits(config, store, premise, hypothesis)
        ba = predict_logits(config, store, hypothesis, premise)
        assert not np.allclose(ab.data, ba.data)

    def test_zero_params_uniform_logits(self):
        config = small_model("treernn")
        store = init_params(config)
        for t in store.params.values():
            t.data[:] = 0.0
        logits = predict_logits(config, store, Var(1), Var(2))
        np.testing.assert_array_equal(logits.data, np.zeros(7))
        loss = softmax_nll(logits, 4)
        assert float(loss.data) == pytest.approx(math.log(7), abs=1e-12)

    def test_single_shared_encoder_parameter_set(self):
        # Tied weights: exactly one embedding table in the store, and nudging
        # it moves both sides' encodings through the logits.
        config = small_model("treelstm", seed=5)
        store = init_params(config)
        embed_names = [n for n in store.names() if n.startswith("embed")]
        assert embed_names == ["embed"]
        premise, hypothesis = Var(1), Var(1)
        before = predict_logits(config, store, premise, hypothesis).data.copy()
        store["embed"].data += 0.05
        after = predict_logits(config, store, premise, hypothesis).data
        assert not np.allclose(before, after)


class TestExampleLoss:
    def test_uniform_loss_is_log7(self):
        config = small_model("nbow")
        store = init_params(config)
        for t in store.params.values():
            t.data[:] = 0.0
        ex = make_example(Var(1), Var(2))
        assert float(example_loss(config, store, ex).data) == pytest.approx(
            math.log(7), abs=1e-12
        )

    def test_initial_loss_near_log7(self):
        # Small random init keeps predictions near uniform.
        examples = generate_pairs(GenConfig(seed=2, per_bin_pairs=8, max_bin=2))
        for kind in ("treernn", "lstm"):
            config = default_model_config(kind, seed=1)
            store = init_params(config)
            losses = [float(example_loss(config, store, ex).data) for ex in examples]
            assert abs(np.mean(losses) - math.log(7)) < 0.1

    def test_saturated_correct_logits_near_zero_loss(self):
        target = RELATION_INDEX[Relation.NEGATION]
        logits = np.zeros(7)
        logits[target] = 1000.0
        assert float(softmax_nll(constant(logits), target).data) == pytest.approx(0.0, abs=1e-9)


class TestPredict:
    def test_one_hot_at_zero_predicts_equivalence(self):
        config = small_model("nbow")
        store = init_params(config)
        for t in store.params.values():
            t.data[:] = 0.0
        store["out.b"].data[0] = 5.0
        assert predict(config, store, Var(1), Var(2)) == Relation.EQUIVALENCE

    def test_tie_breaks_to_lowest_index(self):
        config = small_model("nbow")
        store = init_params(config)
        for t in store.params.values():
            t.data[:] = 0.0
        assert predict(config, store, Var(3), Var(5)) == RELATIONS[0]

    def test_constant_logit_shift_invariant(self):
        config = small_model("treernn", seed=9)
        store = init_params(config)
        pairs = [(Var(1), Var(2)), (parse_sentence("( not p4 )"), Var(4))]
        before = [predict(config, store, p, h) for p, h in pairs]
        store["out.b"].data += 123.0
        after = [predict(config, store, p, h) for p, h in pairs]
        assert before == after

    def test_prediction_in_relation_set(self):
        config = small_model("treerntn", seed=4)
        store = init_params(config)
        examples = generate_pairs(GenConfig(seed=6, per_bin_pairs=5, max_bin=2))
        for ex in examples:
            assert predict(config, store, ex.premise, ex.hypothesis) in RELATIONS


class TestEndToEndGradients:
    @pytest.mark.parametrize("kind", ["treernn", "treerntn", "treelstm", "lstm", "nbow"])
    def test_full_model_gradient_check_bin2(self, kind):
        # Check at O(1) parameter values and on the full training objective
        # (mean NLL + L2): at the tiny production init some true gradients sit
        # below the float64 finite-difference noise floor, which says nothing
        # about gradient correctness.
        from propentail.autodiff import add
        from propentail.datagen import derive_rng
        from propentail.params import l2_penalty

        config = small_model(kind, seed=21, d=4, d_c=4)
        store = init_params(config)
        rng = derive_rng(21, 555)
        for t in store.params.values():
            t.data[:] = rng.uniform(-0.5, 0.5, size=t.data.shape)
        ex = make_example(
            parse_sentence("( ( not p2 ) ( and p6 ) )"), parse_sentence("( not p3 )")
        )
        assert ex.bin == 2

        def build(s):
            return add(example_loss(config, s, ex), l2_penalty(s, 0.01))

        assert gradient_check(build, store, h=1e-5) < 1e-4

    def test_every_parameter_reached(self):
        config = small_model("treernn", seed=23)
        store = init_params(config)
        ex = make_example(Var(2), parse_sentence("( not p2 )"))
        backward(example_loss(config, store, ex))
        for name, t in store.params.items():
            assert t.grad is not None, name


class TestBatchedHead:
    def test_batch_logits_match_per_pair_logits(self):
        from propentail.encoders import compile_sentence
        from propentail.model import batch_logits

        config = small_model("treernn", seed=31)
        store = init_params(config)
        examples = generate_pairs(GenConfig(seed=8, per_bin_pairs=6, max_bin=2))
        prems = [compile_sentence(config.encoder, ex.premise) for ex in examples]
        hyps = [compile_sentence(config.encoder, ex.hypothesis) for ex in examples]
        rows = batch_logits(config, store, prems, hyps)
        for i, ex in enumerate(examples):
            single = predict_logits(config, store, ex.premise, ex.hypothesis)
            np.testing.assert_allclose(rows.data[i], single.data, rtol=1e-10, atol=1e-12)


class TestModelConfig:
    def test_echo_contains_resolved_values(self):
        config = default_model_config("lstm", seed=42)
        echo = config.echo()
        assert echo["kind"] == "lstm"
        assert echo["vocabulary_size"] == 11
        assert echo["seed"] == 42
        tree_echo = default_model_config("treernn").echo()
        assert tree_echo["vocabulary_size"] == 9

    def test_invalid_dc(self):
        with pytest.raises(ValueError):
            ModelConfig(encoder=EncoderConfig("nbow", 4, 4), d_c=0)
