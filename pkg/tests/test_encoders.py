"""Encoder composition functions and sentence encodings.

Each composition is checked against hand-evaluated gate equations or an
independent numpy reimplementation, and gradients against finite differences.
"""

import numpy as np
import pytest

from propentail.autodiff import backward, constant, square_sum
from propentail.datagen import derive_rng
from propentail.encoders import (
    EmptySentenceError,
    EncoderConfig,
    compile_sentence,
    compose_tree_lstm,
    compose_tree_rnn,
    compose_tree_rntn,
    default_encoder_config,
    encode,
    init_encoder_params,
    lstm_step,
    rnn_step,
    treelstm_leaf,
)
from propentail.logic import Bin, Not, Var, parse_sentence, tokenize
from propentail.params import ParamStore, gradient_check


def small_config(kind: str, d: int = 6) -> EncoderConfig:
    if kind in ("treernn", "treerntn"):
        return EncoderConfig(kind=kind, d_emb=d, d_hidden=d)
    return EncoderConfig(kind=kind, d_emb=d, d_hidden=d + 2)


def build_store(config: EncoderConfig, seed: int = 0) -> ParamStore:
    store = ParamStore()
    init_encoder_params(config, store, derive_rng(seed, 999))
    return store


class TestEncoderConfig:
    def test_tree_vocab_size(self):
        assert len(EncoderConfig("treernn", 8, 8).vocabulary) == 9

    def test_sequence_vocab_size(self):
        assert len(EncoderConfig("lstm", 8, 8).vocabulary) == 11
        assert len(EncoderConfig("nbow", 8, 8).vocabulary) == 11

    def test_tree_rnn_dims_tied(self):
        with pytest.raises(ValueError):
            EncoderConfig("treernn", d_emb=8, d_hidden=16)
        with pytest.raises(ValueError):
            EncoderConfig("treerntn", d_emb=8, d_hidden=16)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            EncoderConfig("transformer", 8, 8)

    def test_defaults(self):
        assert default_encoder_config("treernn").d_hidden == 32
        assert default_encoder_config("lstm").d_emb == 32
        assert default_encoder_config("lstm").d_hidden == 64


class TestInitialization:
    def test_weights_within_fan_balanced_range(self):
        from propentail.encoders import init_limit

        config = small_config("treernn")
        store = build_store(config)
        limit = init_limit(store["compose.M"].data.shape)
        assert np.all(np.abs(store["compose.M"].data) <= limit)
        assert np.abs(store["compose.M"].data).max() > 0.5 * limit
        assert np.all(store["compose.b"].data == 0.0)

    def test_init_limit_shrinks_with_fan(self):
        from propentail.encoders import init_limit

        assert init_limit((64, 128)) < init_limit((8, 16))
        assert init_limit((4, 8, 8)) == init_limit((4, 64))

    def test_forget_biases_positive(self):
        config = small_config("lstm")
        store = build_store(config)
        d = config.d_hidden
        b = store["cell.b"].data
        assert np.all(b[d : 2 * d] == 1.0)
        assert np.all(b[:d] == 0.0) and np.all(b[2 * d :] == 0.0)

        tconfig = small_config("treelstm")
        tstore = build_store(tconfig)
        td = tconfig.d_hidden
        nb = tstore["node.b"].data
        assert np.all(nb[3 * td :] == 1.0)
        assert np.all(nb[: 3 * td] == 0.0)


class TestComposeTreeRnn:
    def test_zero_params_zero_output(self):
        d = 4
        out = compose_tree_rnn(
            constant(np.zeros((d, 2 * d))),
            constant(np.zeros(d)),
            constant(np.ones(d)),
            constant(np.ones(d)),
        )
        np.testing.assert_array_equal(out.data, np.zeros(d))

    def test_one_dimensional_cancellation(self):
        out = compose_tree_rnn(
            constant([[1.0, 1.0]]), constant([0.0]), constant([0.5]), constant([-0.5])
        )
        assert out.data[0] == pytest.approx(0.0)

    def test_output_in_tanh_range(self):
        rng = np.random.default_rng(0)
        out = compose_tree_rnn(
            constant(rng.normal(size=(5, 10)) * 3),
            constant(rng.normal(size=5)),
            constant(rng.normal(size=5)),
            constant(rng.normal(size=5)),
        )
        assert np.all(out.data > -1) and np.all(out.data < 1)


class TestComposeTreeRntn:
    def test_zero_tensor_reduces_to_rnn(self):
        rng = np.random.default_rng(1)
        d = 4
        m = constant(rng.normal(size=(d, 2 * d)))
        b = constant(rng.normal(size=d))
        x_l = constant(rng.normal(size=d))
        x_r = constant(rng.normal(size=d))
        plain = compose_tree_rnn(m, b, x_l, x_r)
        with_zero_t = compose_tree_rntn(m, b, constant(np.zeros((d, d, d))), x_l, x_r)
        np.testing.assert_array_equal(plain.data, with_zero_t.data)

    def test_all_zero_params(self):
        d = 3
        out = compose_tree_rntn(
            constant(np.zeros((d, 2 * d))),
            constant(np.zeros(d)),
            constant(np.zeros((d, d, d))),
            constant(np.ones(d)),
            constant(np.ones(d)),
        )
        np.testing.assert_array_equal(out.data, np.zeros(d))

    def test_is_sum_of_terms(self):
        rng = np.random.default_rng(2)
        d = 3
        m = rng.normal(size=(d, 2 * d))
        b = rng.normal(size=d)
        t = rng.normal(size=(d, d, d))
        x_l = rng.normal(size=d)
        x_r = rng.normal(size=d)
        nn_term = np.tanh(m @ np.concatenate([x_l, x_r]) + b)
        bilinear = np.array(
            [x_l @ t[k] @ x_r for k in range(d)]
        )
        expected = nn_term + np.tanh(bilinear)
        got = compose_tree_rntn(
            constant(m), constant(b), constant(t), constant(x_l), constant(x_r)
        )
        np.testing.assert_allclose(got.data, expected, rtol=1e-12)


class TestComposeTreeLstm:
    def test_all_zeros(self):
        d = 3
        w = constant(np.zeros((5 * d, 2 * d)))
        b = constant(np.zeros(5 * d))
        zero_state = (constant(np.zeros(d)), constant(np.zeros(d)))
        h, c = compose_tree_lstm(w, b, zero_state, zero_state)
        np.testing.assert_array_equal(h.data, np.zeros(d))
        np.testing.assert_array_equal(c.data, np.zeros(d))

    def test_left_cell_passthrough_hand_evaluated(self):
        # zero weights/biases and children h=0 with c_l=1, c_r=0:
        # all gates sit at 0.5 and u=0, so c = 0.5 and h = 0.5*tanh(0.5)
        d = 2
        w = constant(np.zeros((5 * d, 2 * d)))
        b = constant(np.zeros(5 * d))
        left = (constant(np.zeros(d)), constant(np.ones(d)))
        right = (constant(np.zeros(d)), constant(np.zeros(d)))
        h, c = compose_tree_lstm(w, b, left, right)
        np.testing.assert_allclose(c.data, 0.5)
        np.testing.assert_allclose(h.data, 0.5 * np.tanh(0.5))

    def test_h_bounded(self):
        rng = np.random.default_rng(3)
        d = 4
        w = constant(rng.normal(size=(5 * d, 2 * d)))
        b = constant(rng.normal(size=5 * d))
        left = (constant(rng.normal(size=d)), constant(rng.normal(size=d)))
        right = (constant(rng.normal(size=d)), constant(rng.normal(size=d)))
        h, _ = compose_tree_lstm(w, b, left, right)
        assert np.all(np.abs(h.data) < 1)


class TestLstmStep:
    def test_zero_everything(self):
        d_e, d_h = 3, 4
        w = constant(np.zeros((4 * d_h, d_e + d_h)))
        b = constant(np.zeros(4 * d_h))
        state = (constant(np.zeros(d_h)), constant(np.zeros(d_h)))
        h, c = lstm_step(w, b, constant(np.ones(d_e)), state)
        np.testing.assert_array_equal(h.data, np.zeros(d_h))
        np.testing.assert_array_equal(c.data, np.zeros(d_h))

    def test_memory_passthrough_gate_semantics(self):
        # Saturate f -> 1, i -> 0, o -> 1 via large biases: c' = c, h' = tanh(c)
        d_e, d_h = 2, 3
        w = constant(np.zeros((4 * d_h, d_e + d_h)))
        bias = np.zeros(4 * d_h)
        bias[0 * d_h : 1 * d_h] = -100.0  # i -> 0
        bias[1 * d_h : 2 * d_h] = +100.0  # f -> 1
        bias[2 * d_h : 3 * d_h] = +100.0  # o -> 1
        b = constant(bias)
        c0 = np.array([0.3, -0.7, 1.2])
        state = (constant(np.zeros(d_h)), constant(c0))
        h, c = lstm_step(w, b, constant(np.ones(d_e)), state)
        np.testing.assert_allclose(c.data, c0, atol=1e-12)
        np.testing.assert_allclose(h.data, np.tanh(c0), atol=1e-12)

    def test_matches_numpy_reimplementation(self):
        rng = np.random.default_rng(4)
        d_e, d_h = 3, 4
        w = rng.normal(size=(4 * d_h, d_e + d_h))
        b = rng.normal(size=4 * d_h)
        x = rng.normal(size=d_e)
        h0 = rng.normal(size=d_h)
        c0 = rng.normal(size=d_h)

        def sig(v):
            return 1.0 / (1.0 + np.exp(-v))

        gates = w @ np.concatenate([x, h0]) + b
        i = sig(gates[0 * d_h : 1 * d_h])
        f = sig(gates[1 * d_h : 2 * d_h])
        o = sig(gates[2 * d_h : 3 * d_h])
        u = np.tanh(gates[3 * d_h : 4 * d_h])
        c_expected = f * c0 + i * u
        h_expected = o * np.tanh(c_expected)

        h, c = lstm_step(
            constant(w), constant(b), constant(x), (constant(h0), constant(c0))
        )
        np.testing.assert_allclose(c.data, c_expected, rtol=1e-12)
        np.testing.assert_allclose(h.data, h_expected, rtol=1e-12)


class TestTreeLstmLeaf:
    def test_zero_weights(self):
        d_e, d_h = 3, 2
        h, c = treelstm_leaf(
            constant(np.zeros((3 * d_h, d_e))), constant(np.zeros(3 * d_h)), constant(np.ones(d_e))
        )
        np.testing.assert_array_equal(c.data, np.zeros(d_h))
        np.testing.assert_array_equal(h.data, np.zeros(d_h))

    def test_matches_numpy_reimplementation(self):
        rng = np.random.default_rng(5)
        d_e, d_h = 4, 3
        w = rng.normal(size=(3 * d_h, d_e))
        b = rng.normal(size=3 * d_h)
        x = rng.normal(size=d_e)

        def sig(v):
            return 1.0 / (1.0 + np.exp(-v))

        gates = w @ x + b
        i = sig(gates[:d_h])
        o = sig(gates[d_h : 2 * d_h])
        u = np.tanh(gates[2 * d_h :])
        c_expected = i * u
        h_expected = o * np.tanh(c_expected)
        h, c = treelstm_leaf(constant(w), constant(b), constant(x))
        np.testing.assert_allclose(c.data, c_expected, rtol=1e-12)
        np.testing.assert_allclose(h.data, h_expected, rtol=1e-12)


class TestEncode:
    def test_nbow_single_token(self):
        config = small_config("nbow")
        store = build_store(config, seed=1)
        out = encode(config, store, ["p1"])
        row = config.token_index["p1"]
        expected = np.tanh(
            store["proj.W"].data @ store["embed"].data[row] + store["proj.b"].data
        )
        np.testing.assert_allclose(out.data, expected, rtol=1e-12)

    def test_treernn_single_composition(self):
        config = small_config("treernn")
        store = build_store(config, seed=2)
        out = encode(config, store, parse_sentence("( not p3 )"))
        e = store["embed"].data
        idx = config.token_index
        expected = np.tanh(
            store["compose.M"].data @ np.concatenate([e[idx["not"]], e[idx["p3"]]])
            + store["compose.b"].data
        )
        np.testing.assert_allclose(out.data, expected, rtol=1e-12)

    def test_lstm_consumes_parentheses(self):
        config = small_config("lstm")
        store = build_store(config, seed=3)
        tokens = tokenize("( not p3 )")
        assert len(tokens) == 4
        with_parens = encode(config, store, tokens)
        without = encode(config, store, ["not", "p3"])
        assert not np.allclose(with_parens.data, without.data)

    def test_formula_accepted_by_sequence_kinds(self):
        config = small_config("lstm")
        store = build_store(config, seed=3)
        f = parse_sentence("( not p3 )")
        from_formula = encode(config, store, f)
        from_tokens = encode(config, store, tokenize("( not p3 )"))
        np.testing.assert_array_equal(from_formula.data, from_tokens.data)

    def test_empty_sentence_rejected(self):
        config = small_config("lstm")
        store = build_store(config)
        with pytest.raises(EmptySentenceError):
            encode(config, store, [])

    def test_tree_kind_requires_formula(self):
        config = small_config("treernn")
        store = build_store(config)
        with pytest.raises(TypeError):
            encode(config, store, ["p1"])

    def test_determinism(self):
        for kind in ("treernn", "treerntn", "treelstm", "lstm", "nbow"):
            config = small_config(kind)
            store = build_store(config, seed=7)
            f = parse_sentence("( p1 ( and ( not p4 ) ) )")
            a = encode(config, store, f)
            b = encode(config, store, f)
            np.testing.assert_array_equal(a.data, b.data)

    def test_structural_sensitivity(self):
        left_branching = parse_sentence("( ( p1 ( and p2 ) ) ( or p3 ) )")
        right_branching = parse_sentence("( p1 ( and ( p2 ( or p3 ) ) ) )")
        for kind in ("treernn", "treerntn", "treelstm", "lstm"):
            config = small_config(kind)
            store = build_store(config, seed=11)
            a = encode(config, store, left_branching)
            b = encode(config, store, right_branching)
            assert not np.allclose(a.data, b.data), kind

    def test_nbow_is_structure_blind(self):
        # Same token bag, different bracketings: NBOW cannot tell them apart.
        config = small_config("nbow")
        store = build_store(config, seed=11)
        a = encode(config, store, parse_sentence("( ( p1 ( and p2 ) ) ( or p3 ) )"))
        b = encode(config, store, parse_sentence("( p1 ( and ( p2 ( or p3 ) ) ) )"))
        np.testing.assert_allclose(a.data, b.data, atol=1e-15)

    def test_treerntn_zero_tensor_equals_treernn(self):
        config = small_config("treerntn")
        rnn_config = small_config("treernn")
        store = build_store(config, seed=13)
        store["compose.T"].data[:] = 0.0
        rnn_store = ParamStore()
        rnn_store.add("embed", store["embed"].data.copy())
        rnn_store.add("compose.M", store["compose.M"].data.copy())
        rnn_store.add("compose.b", store["compose.b"].data.copy())
        for text in ("p2", "( not p3 )", "( p1 ( and ( not ( p2 ( or p5 ) ) ) ) )"):
            f = parse_sentence(text)
            np.testing.assert_allclose(
                encode(config, store, f).data,
                encode(rnn_config, rnn_store, f).data,
                rtol=1e-12,
            )


class TestEncodeGradients:
    @pytest.mark.parametrize("kind", ["treernn", "treerntn", "treelstm", "lstm", "nbow", "rnn"])
    def test_gradient_flow_through_encode(self, kind):
        from propentail.logic import connective_count

        config = small_config(kind, d=4)
        store = build_store(config, seed=17)
        sentence = parse_sentence("( ( not p2 ) ( and ( p1 ( or ( not p6 ) ) ) ) )")
        assert connective_count(sentence) == 4
        compiled = compile_sentence(config, sentence)

        def build(s):
            from propentail.encoders import encode_compiled

            return square_sum(encode_compiled(config, s, compiled))

        assert gradient_check(build, store, h=1e-5) < 1e-4

    def test_all_encoder_params_receive_gradient(self):
        for kind in ("treernn", "treerntn", "treelstm", "lstm", "nbow"):
            config = small_config(kind, d=4)
            store = build_store(config, seed=19)
            loss = square_sum(encode(config, store, parse_sentence("( p1 ( and p2 ) )")))
            backward(loss)
            for name, t in store.params.items():
                assert t.grad is not None, f"{kind}: no gradient for {name}"


class TestRnnStep:
    def test_zero_weights(self):
        out = rnn_step(
            constant(np.zeros((3, 5))), constant(np.zeros(3)), constant(np.ones(2)), constant(np.ones(3))
        )
        np.testing.assert_array_equal(out.data, np.zeros(3))


class TestFusedMatchesPrimitives:
    """The fused whole-sentence encoders must agree with step-by-step
    application of the public composition functions."""

    def test_lstm_sequence_matches_steps(self):
        config = small_config("lstm")
        store = build_store(config, seed=29)
        rng = np.random.default_rng(5)
        for t in store.params.values():
            t.data[:] = rng.uniform(-0.4, 0.4, size=t.data.shape)
        tokens = tokenize("( ( not p2 ) ( and ( p1 ( or p6 ) ) ) )")
        fused = encode(config, store, tokens)

        from propentail.autodiff import embedding_lookup

        state = (constant(np.zeros(config.d_hidden)), constant(np.zeros(config.d_hidden)))
        for tok in tokens:
            x = embedding_lookup(store["embed"], config.token_index[tok])
            state = lstm_step(store["cell.W"], store["cell.b"], x, state)
        np.testing.assert_allclose(fused.data, state[0].data, rtol=1e-14, atol=1e-15)

    def test_treelstm_tree_matches_compose(self):
        config = small_config("treelstm")
        store = build_store(config, seed=31)
        rng = np.random.default_rng(6)
        for t in store.params.values():
            t.data[:] = rng.uniform(-0.4, 0.4, size=t.data.shape)
        f = parse_sentence("( ( not p2 ) ( and ( p1 ( or p6 ) ) ) )")
        fused = encode(config, store, f)

        from propentail.autodiff import embedding_lookup
        from propentail.encoders import _compile_tree

        compiled = _compile_tree(f, config.token_index)

        def walk(node):
            if isinstance(node, int):
                x = embedding_lookup(store["embed"], node)
                return treelstm_leaf(store["leaf.W"], store["leaf.b"], x)
            return compose_tree_lstm(store["node.W"], store["node.b"], walk(node[0]), walk(node[1]))

        np.testing.assert_allclose(fused.data, walk(compiled)[0].data, rtol=1e-14, atol=1e-15)

    def test_treernn_fused_matches_compose(self):
        config = small_config("treernn")
        store = build_store(config, seed=33)
        f = parse_sentence("( p3 ( or ( not p5 ) ) )")
        fused = encode(config, store, f)

        from propentail.autodiff import embedding_lookup
        from propentail.encoders import _compile_tree

        compiled = _compile_tree(f, config.token_index)

        def walk(node):
            if isinstance(node, int):
                return embedding_lookup(store["embed"], node)
            return compose_tree_rnn(store["compose.M"], store["compose.b"], walk(node[0]), walk(node[1]))

        np.testing.assert_allclose(fused.data, walk(compiled).data, rtol=1e-14, atol=1e-15)

    def test_treerntn_fused_matches_compose(self):
        config = small_config("treerntn")
        store = build_store(config, seed=35)
        f = parse_sentence("( p3 ( or ( not p5 ) ) )")
        fused = encode(config, store, f)

        from propentail.autodiff import embedding_lookup
        from propentail.encoders import _compile_tree

        compiled = _compile_tree(f, config.token_index)

        def walk(node):
            if isinstance(node, int):
                return embedding_lookup(store["embed"], node)
            return compose_tree_rntn(
                store["compose.M"],
                store["compose.b"],
                store["compose.T"],
                walk(node[0]),
                walk(node[1]),
            )

        np.testing.assert_allclose(fused.data, walk(compiled).data, rtol=1e-14, atol=1e-15)

    def test_lstm_sequence_gradients_match_steps(self):
        # Same loss through both paths: parameter gradients must agree.
        config = small_config("lstm", d=3)
        tokens = tokenize("( not ( p1 ( and p2 ) ) )")
        rows = None

        def run(use_fused: bool):
            from propentail.autodiff import embedding_lookup

            store = build_store(config, seed=37)
            rng = np.random.default_rng(9)
            for t in store.params.values():
                t.data[:] = rng.uniform(-0.4, 0.4, size=t.data.shape)
            if use_fused:
                out = encode(config, store, tokens)
            else:
                state = (
                    constant(np.zeros(config.d_hidden)),
                    constant(np.zeros(config.d_hidden)),
                )
                for tok in tokens:
                    x = embedding_lookup(store["embed"], config.token_index[tok])
                    state = lstm_step(store["cell.W"], store["cell.b"], x, state)
                out = state[0]
            backward(square_sum(out))
            return {name: t.grad.copy() for name, t in store.params.items() if t.grad is not None}

        fused_grads = run(True)
        step_grads = run(False)
        assert set(fused_grads) == set(step_grads)
        for name in fused_grads:
            np.testing.assert_allclose(
                fused_grads[name], step_grads[name], rtol=1e-12, atol=1e-14, err_msg=name
            )
