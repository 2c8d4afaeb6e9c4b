"""Sentence encoders: TreeRNN, TreeRNTN, TreeLSTM, sequence LSTM, and NBOW.

Tree encoders walk the canonical binary bracketing, treating connective words
as leaves, so composition is purely structural.  Sequence encoders consume the
token string left to right, parentheses included.  A plain (non-LSTM) RNN is
also available as an optional kind; it tends to underfit and carries no
guarantees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .autodiff import (
    ShapeMismatchError,
    Tensor,
    _accum,
    _accum_fresh,
    _own_grad,
    _sigmoid_values,
    add,
    add_n,
    affine,
    bilinear_tensor_form,
    concat,
    constant,
    embedding_lookup,
    embedding_mean,
    hadamard,
    sigmoid,
    slice1d,
    tanh,
)
from .logic import SEQUENCE_VOCABULARY, TREE_VOCABULARY, Bin, Formula, Not, Var, render_tokens
from .params import ParamStore

TREE_KINDS = ("treernn", "treerntn", "treelstm")
SEQUENCE_KINDS = ("lstm", "nbow", "rnn")
KINDS = TREE_KINDS + SEQUENCE_KINDS

FORGET_BIAS = 1.0


def init_limit(shape: tuple[int, ...]) -> float:
    """Fan-balanced uniform limit.

    A fixed small range starves deep stacks of signal at this depth and width
    (activations shrink ~2.5x per layer), which stalls AdaDelta for the first
    few thousand steps; scaling by fan keeps layer gain near 1.
    """
    if len(shape) == 2:
        fan_out, fan_in = shape
    elif len(shape) == 3:
        fan_out, fan_in = shape[0], shape[1] * shape[2]
    else:
        raise ValueError(f"no init rule for shape {shape}")
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    limit = init_limit(shape)
    return rng.uniform(-limit, limit, size=shape)


class EmptySentenceError(ValueError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    kind: str
    d_emb: int = 32
    d_hidden: int = 64

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown encoder kind {self.kind!r}")
        if self.d_emb <= 0 or self.d_hidden <= 0:
            raise ValueError("dimensions must be positive")
        if self.kind in ("treernn", "treerntn") and self.d_emb != self.d_hidden:
            raise ValueError(f"{self.kind} requires d_emb == d_hidden")

    @property
    def vocabulary(self) -> tuple[str, ...]:
        return TREE_VOCABULARY if self.kind in TREE_KINDS else SEQUENCE_VOCABULARY

    @property
    def token_index(self) -> dict[str, int]:
        return {tok: i for i, tok in enumerate(self.vocabulary)}


def default_encoder_config(kind: str) -> EncoderConfig:
    """Stock dimensions: d=32 for the plain tree models (leaves feed
    composition directly), 32-dim embeddings into 64-dim states elsewhere."""
    if kind in ("treernn", "treerntn"):
        return EncoderConfig(kind=kind, d_emb=32, d_hidden=32)
    return EncoderConfig(kind=kind, d_emb=32, d_hidden=64)


def init_encoder_params(config: EncoderConfig, store: ParamStore, rng: np.random.Generator) -> None:
    """Add the encoder's parameters: fan-balanced uniform weights, zero biases
    except forget-gate biases at +1."""

    def uniform(shape):
        return init_uniform(rng, shape)

    d_e, d_h = config.d_emb, config.d_hidden
    store.add("embed", uniform((len(config.vocabulary), d_e)))
    if config.kind == "treernn":
        store.add("compose.M", uniform((d_h, 2 * d_h)))
        store.add("compose.b", np.zeros(d_h))
    elif config.kind == "treerntn":
        store.add("compose.M", uniform((d_h, 2 * d_h)))
        store.add("compose.b", np.zeros(d_h))
        store.add("compose.T", uniform((d_h, d_h, d_h)))
    elif config.kind == "treelstm":
        # leaf gates [i, o, u]; node gates [i, o, u, f_left, f_right]
        store.add("leaf.W", uniform((3 * d_h, d_e)))
        store.add("leaf.b", np.zeros(3 * d_h))
        store.add("node.W", uniform((5 * d_h, 2 * d_h)))
        node_b = np.zeros(5 * d_h)
        node_b[3 * d_h :] = FORGET_BIAS
        store.add("node.b", node_b)
    elif config.kind == "lstm":
        # gates [i, f, o, u] over [x_t; h]
        store.add("cell.W", uniform((4 * d_h, d_e + d_h)))
        cell_b = np.zeros(4 * d_h)
        cell_b[d_h : 2 * d_h] = FORGET_BIAS
        store.add("cell.b", cell_b)
    elif config.kind == "rnn":
        store.add("cell.W", uniform((d_h, d_e + d_h)))
        store.add("cell.b", np.zeros(d_h))
    else:  # nbow
        store.add("proj.W", uniform((d_h, d_e)))
        store.add("proj.b", np.zeros(d_h))


def compose_tree_rnn(m: Tensor, b: Tensor, x_l: Tensor, x_r: Tensor) -> Tensor:
    return tanh(affine(m, concat(x_l, x_r), b))


def compose_tree_rntn(m: Tensor, b: Tensor, t: Tensor, x_l: Tensor, x_r: Tensor) -> Tensor:
    return add(compose_tree_rnn(m, b, x_l, x_r), tanh(bilinear_tensor_form(x_l, t, x_r)))


State = tuple[Tensor, Tensor]  # (h, c)


def treelstm_leaf(w: Tensor, b: Tensor, x: Tensor) -> State:
    """Leaf transform: a childless cell driven by the token embedding."""
    d = w.shape[0] // 3
    gates = affine(w, x, b)
    i = sigmoid(slice1d(gates, 0, d))
    o = sigmoid(slice1d(gates, d, 2 * d))
    u = tanh(slice1d(gates, 2 * d, 3 * d))
    c = hadamard(i, u)
    h = hadamard(o, tanh(c))
    return h, c


def compose_tree_lstm(w: Tensor, b: Tensor, left: State, right: State) -> State:
    """Binary-constituency cell: gates read both children's hidden states; each
    child keeps its own forget gate."""
    h_l, c_l = left
    h_r, c_r = right
    d = h_l.shape[0]
    gates = affine(w, concat(h_l, h_r), b)
    i = sigmoid(slice1d(gates, 0, d))
    o = sigmoid(slice1d(gates, d, 2 * d))
    u = tanh(slice1d(gates, 2 * d, 3 * d))
    f_l = sigmoid(slice1d(gates, 3 * d, 4 * d))
    f_r = sigmoid(slice1d(gates, 4 * d, 5 * d))
    c = add_n([hadamard(i, u), hadamard(f_l, c_l), hadamard(f_r, c_r)])
    h = hadamard(o, tanh(c))
    return h, c


def lstm_step(w: Tensor, b: Tensor, x_t: Tensor, state: State) -> State:
    h, c = state
    d = h.shape[0]
    gates = affine(w, concat(x_t, h), b)
    i = sigmoid(slice1d(gates, 0, d))
    f = sigmoid(slice1d(gates, d, 2 * d))
    o = sigmoid(slice1d(gates, 2 * d, 3 * d))
    u = tanh(slice1d(gates, 3 * d, 4 * d))
    c_next = add(hadamard(f, c), hadamard(i, u))
    h_next = hadamard(o, tanh(c_next))
    return h_next, c_next


def rnn_step(w: Tensor, b: Tensor, x_t: Tensor, h: Tensor) -> Tensor:
    return tanh(affine(w, concat(x_t, h), b))


# ---------------------------------------------------------------------------
# Fused cells: one graph node per composition with a hand-derived backward.
# Mathematically identical to the primitive-composed functions above (the
# tests assert agreement); they exist because per-node Python overhead, not
# arithmetic, dominates the runtime of tree/sequence encoders.
# ---------------------------------------------------------------------------


def fused_pair_tanh_affine(w: Tensor, b: Tensor, x_l: Tensor, x_r: Tensor) -> Tensor:
    """tanh(W [x_l; x_r] + b) as a single node."""
    n = x_l.data.shape[0]
    xlr = np.concatenate((x_l.data, x_r.data))
    if w.data.shape != (b.data.shape[0], xlr.shape[0]):
        raise ShapeMismatchError("fused_pair_tanh_affine", (b.data.shape[0], xlr.shape[0]), w.data.shape)
    out = np.tanh(w.data @ xlr + b.data)

    def backward_fn(g: np.ndarray) -> None:
        dz = g * (1.0 - out * out)
        _accum_fresh(w, np.outer(dz, xlr))
        dxh = w.data.T @ dz
        _accum(x_l, dxh[:n])
        _accum(x_r, dxh[n:])
        _accum_fresh(b, dz)

    return Tensor(out, (w, b, x_l, x_r), backward_fn)


def fused_compose_rntn(
    m: Tensor, b: Tensor, t: Tensor, x_l: Tensor, x_r: Tensor
) -> Tensor:
    """tanh(M [x_l; x_r] + b) + tanh(x_l T x_r) as a single node."""
    d = x_l.data.shape[0]
    xlr = np.concatenate((x_l.data, x_r.data))
    if m.data.shape != (d, 2 * d) or b.data.shape != (d,) or t.data.shape != (d, d, d):
        raise ShapeMismatchError("fused_compose_rntn", (d, 2 * d), (m.data.shape, t.data.shape))
    nn = np.tanh(m.data @ xlr + b.data)
    xy = np.outer(x_l.data, x_r.data).reshape(-1)
    bl = np.tanh(t.data.reshape(d, -1) @ xy)

    def backward_fn(g: np.ndarray) -> None:
        dz = g * (1.0 - nn * nn)
        dbl = g * (1.0 - bl * bl)
        _accum_fresh(m, np.outer(dz, xlr))
        tg = np.tensordot(dbl, t.data, axes=([0], [0]))
        _accum_fresh(t, np.outer(dbl, xy).reshape(d, d, d))
        dxh = m.data.T @ dz
        _accum_fresh(x_l, dxh[:d] + tg @ x_r.data)
        _accum_fresh(x_r, dxh[d:] + tg.T @ x_l.data)
        _accum_fresh(b, dz)

    return Tensor(nn + bl, (m, b, t, x_l, x_r), backward_fn)


def fused_lstm_step(w: Tensor, b: Tensor, x_t: Tensor, state: State) -> State:
    """Full LSTM step as one node emitting [h'; c'], then two cheap slices."""
    h, c = state
    d = h.data.shape[0]
    d_in = x_t.data.shape[0]
    xh = np.concatenate((x_t.data, h.data))
    if w.data.shape != (4 * d, d_in + d) or b.data.shape != (4 * d,) or c.data.shape != (d,):
        raise ShapeMismatchError("fused_lstm_step", (4 * d, d_in + d), (w.data.shape, b.data.shape))
    z = w.data @ xh + b.data
    i = _sigmoid_values(z[:d])
    f = _sigmoid_values(z[d : 2 * d])
    o = _sigmoid_values(z[2 * d : 3 * d])
    u = np.tanh(z[3 * d :])
    c_new = f * c.data + i * u
    tc = np.tanh(c_new)
    out = np.concatenate((o * tc, c_new))

    def backward_fn(g: np.ndarray) -> None:
        gh = g[:d]
        gc = g[d:]
        do = gh * tc
        dc = gc + gh * o * (1.0 - tc * tc)
        dz = np.concatenate(
            (
                dc * u * i * (1.0 - i),
                dc * c.data * f * (1.0 - f),
                do * o * (1.0 - o),
                dc * i * (1.0 - u * u),
            )
        )
        _accum_fresh(w, np.outer(dz, xh))
        dxh = w.data.T @ dz
        _accum(x_t, dxh[:d_in])
        _accum(h, dxh[d_in:])
        _accum_fresh(c, dc * f)
        _accum_fresh(b, dz)

    cell = Tensor(out, (w, b, x_t, h, c), backward_fn)
    return slice1d(cell, 0, d), slice1d(cell, d, 2 * d)


def fused_treelstm_node(w: Tensor, b: Tensor, left: State, right: State) -> State:
    h_l, c_l = left
    h_r, c_r = right
    d = h_l.data.shape[0]
    hh = np.concatenate((h_l.data, h_r.data))
    if w.data.shape != (5 * d, 2 * d) or b.data.shape != (5 * d,):
        raise ShapeMismatchError("fused_treelstm_node", (5 * d, 2 * d), (w.data.shape, b.data.shape))
    z = w.data @ hh + b.data
    i = _sigmoid_values(z[:d])
    o = _sigmoid_values(z[d : 2 * d])
    u = np.tanh(z[2 * d : 3 * d])
    f_l = _sigmoid_values(z[3 * d : 4 * d])
    f_r = _sigmoid_values(z[4 * d :])
    c_new = i * u + f_l * c_l.data + f_r * c_r.data
    tc = np.tanh(c_new)
    out = np.concatenate((o * tc, c_new))

    def backward_fn(g: np.ndarray) -> None:
        gh = g[:d]
        gc = g[d:]
        do = gh * tc
        dc = gc + gh * o * (1.0 - tc * tc)
        dz = np.concatenate(
            (
                dc * u * i * (1.0 - i),
                do * o * (1.0 - o),
                dc * i * (1.0 - u * u),
                dc * c_l.data * f_l * (1.0 - f_l),
                dc * c_r.data * f_r * (1.0 - f_r),
            )
        )
        _accum_fresh(w, np.outer(dz, hh))
        dhh = w.data.T @ dz
        _accum(h_l, dhh[:d])
        _accum(h_r, dhh[d:])
        _accum_fresh(c_l, dc * f_l)
        _accum_fresh(c_r, dc * f_r)
        _accum_fresh(b, dz)

    cell = Tensor(out, (w, b, h_l, c_l, h_r, c_r), backward_fn)
    return slice1d(cell, 0, d), slice1d(cell, d, 2 * d)


def fused_treelstm_leaf(w: Tensor, b: Tensor, x: Tensor) -> State:
    d = w.data.shape[0] // 3
    if w.data.shape != (3 * d, x.data.shape[0]) or b.data.shape != (3 * d,):
        raise ShapeMismatchError("fused_treelstm_leaf", (3 * d, x.data.shape[0]), (w.data.shape, b.data.shape))
    z = w.data @ x.data + b.data
    i = _sigmoid_values(z[:d])
    o = _sigmoid_values(z[d : 2 * d])
    u = np.tanh(z[2 * d :])
    c_new = i * u
    tc = np.tanh(c_new)
    out = np.concatenate((o * tc, c_new))

    def backward_fn(g: np.ndarray) -> None:
        gh = g[:d]
        gc = g[d:]
        do = gh * tc
        dc = gc + gh * o * (1.0 - tc * tc)
        dz = np.concatenate(
            (
                dc * u * i * (1.0 - i),
                do * o * (1.0 - o),
                dc * i * (1.0 - u * u),
            )
        )
        _accum_fresh(w, np.outer(dz, x.data))
        _accum_fresh(x, w.data.T @ dz)
        _accum_fresh(b, dz)

    cell = Tensor(out, (w, b, x), backward_fn)
    return slice1d(cell, 0, d), slice1d(cell, d, 2 * d)


def fused_lstm_sequence(
    w: Tensor, b: Tensor, embed: Tensor, rows: list[int], d_hidden: int
) -> Tensor:
    """Entire LSTM pass over one token sequence as a single node.

    Forward states are cached per step; backward runs the reverse recurrence
    and then forms the weight gradient with one GEMM over the stacked steps.
    """
    d = d_hidden
    steps = len(rows)
    w_data, b_data, table = w.data, b.data, embed.data
    d_in = table.shape[1]
    if w_data.shape != (4 * d, d_in + d) or b_data.shape != (4 * d,):
        raise ShapeMismatchError("fused_lstm_sequence", (4 * d, d_in + d), (w_data.shape, b_data.shape))
    inputs = np.empty((steps, d_in + d))
    gates = np.empty((steps, 3 * d))  # sigmoided i, f, o
    updates = np.empty((steps, d))
    cells = np.empty((steps, d))
    cell_tanh = np.empty((steps, d))
    h = np.zeros(d)
    c = np.zeros(d)
    for step, row in enumerate(rows):
        xh = inputs[step]
        xh[:d_in] = table[row]
        xh[d_in:] = h
        z = w_data @ xh + b_data
        s = _sigmoid_values(z[: 3 * d])
        u = np.tanh(z[3 * d :])
        gates[step] = s
        updates[step] = u
        c = s[d : 2 * d] * c + s[:d] * u
        cells[step] = c
        tc = np.tanh(c)
        cell_tanh[step] = tc
        h = s[2 * d :] * tc

    def backward_fn(g: np.ndarray) -> None:
        dz = np.empty((steps, 4 * d))
        w_h = w_data[:, d_in:]
        dh = np.array(g, dtype=np.float64)
        dc = np.zeros(d)
        for step in range(steps - 1, -1, -1):
            i = gates[step, :d]
            f = gates[step, d : 2 * d]
            o = gates[step, 2 * d :]
            u = updates[step]
            tc = cell_tanh[step]
            c_prev = cells[step - 1] if step > 0 else 0.0
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            row_dz = dz[step]
            row_dz[:d] = dc * u * i * (1.0 - i)
            row_dz[d : 2 * d] = dc * c_prev * f * (1.0 - f)
            row_dz[2 * d : 3 * d] = do * o * (1.0 - o)
            row_dz[3 * d :] = dc * i * (1.0 - u * u)
            dc = dc * f
            dh = w_h.T @ row_dz
        _accum_fresh(w, dz.T @ inputs)
        _accum_fresh(b, dz.sum(axis=0))
        dx = dz @ w_data[:, :d_in]
        np.add.at(_own_grad(embed), np.asarray(rows, dtype=np.intp), dx)

    return Tensor(h, (w, b, embed), backward_fn)


def fused_treelstm_tree(
    leaf_w: Tensor,
    leaf_b: Tensor,
    node_w: Tensor,
    node_b: Tensor,
    embed: Tensor,
    tree: "CompiledTree",
) -> Tensor:
    """Entire TreeLSTM pass over one compiled tree as a single node."""
    d = leaf_w.data.shape[0] // 3
    lw, lb = leaf_w.data, leaf_b.data
    nw, nb = node_w.data, node_b.data
    table = embed.data
    if nw.shape != (5 * d, 2 * d) or lw.shape[1] != table.shape[1]:
        raise ShapeMismatchError("fused_treelstm_tree", (5 * d, 2 * d), (nw.shape, lw.shape))

    # Post-order caches; parents always appear after their children.
    kinds: list[bool] = []  # True = leaf
    leaf_rows: list[int] = []
    leaf_slot: list[int] = []  # position within the leaf stack
    node_children: list[tuple[int, int]] = []
    node_children_inputs: list[np.ndarray] = []
    node_slot: list[int] = []
    gate_cache: list[np.ndarray] = []
    update_cache: list[np.ndarray] = []
    c_cache: list[np.ndarray] = []
    tc_cache: list[np.ndarray] = []

    def walk(node) -> tuple[np.ndarray, int]:
        if isinstance(node, int):
            z = lw @ table[node] + lb
            s = _sigmoid_values(z[: 2 * d])
            u = np.tanh(z[2 * d :])
            c = s[:d] * u
            tc = np.tanh(c)
            kinds.append(True)
            leaf_slot.append(len(leaf_rows))
            node_slot.append(-1)
            leaf_rows.append(node)
            node_children.append((-1, -1))
            gate_cache.append(s)
            update_cache.append(u)
            c_cache.append(c)
            tc_cache.append(tc)
            return s[d:] * tc, len(kinds) - 1
        (h_l, idx_l) = walk(node[0])
        (h_r, idx_r) = walk(node[1])
        hh = np.concatenate((h_l, h_r))
        z = nw @ hh + nb
        s = np.empty(4 * d)
        s[: 2 * d] = _sigmoid_values(z[: 2 * d])  # i, o
        s[2 * d :] = _sigmoid_values(z[3 * d :])  # f_l, f_r
        u = np.tanh(z[2 * d : 3 * d])
        c = s[:d] * u + s[2 * d : 3 * d] * c_cache[idx_l] + s[3 * d :] * c_cache[idx_r]
        tc = np.tanh(c)
        kinds.append(False)
        leaf_slot.append(-1)
        node_slot.append(len(node_children_inputs))
        node_children.append((idx_l, idx_r))
        node_children_inputs.append(hh)
        gate_cache.append(s)
        update_cache.append(u)
        c_cache.append(c)
        tc_cache.append(tc)
        return s[d : 2 * d] * tc, len(kinds) - 1

    root_h, root_idx = walk(tree)

    def backward_fn(g: np.ndarray) -> None:
        count = len(kinds)
        dh = np.zeros((count, d))
        dc = np.zeros((count, d))
        dh[root_idx] = g
        n_leaves = len(leaf_rows)
        n_nodes = len(node_children_inputs)
        dz_leaf = np.empty((n_leaves, 3 * d))
        dz_node = np.empty((n_nodes, 5 * d))
        nw_t = nw.T
        for idx in range(count - 1, -1, -1):
            s = gate_cache[idx]
            u = update_cache[idx]
            tc = tc_cache[idx]
            if kinds[idx]:
                i, o = s[:d], s[d:]
                do = dh[idx] * tc
                dci = dc[idx] + dh[idx] * o * (1.0 - tc * tc)
                row = dz_leaf[leaf_slot[idx]]
                row[:d] = dci * u * i * (1.0 - i)
                row[d : 2 * d] = do * o * (1.0 - o)
                row[2 * d :] = dci * i * (1.0 - u * u)
            else:
                i, o, f_l, f_r = s[:d], s[d : 2 * d], s[2 * d : 3 * d], s[3 * d :]
                idx_l, idx_r = node_children[idx]
                do = dh[idx] * tc
                dci = dc[idx] + dh[idx] * o * (1.0 - tc * tc)
                row = dz_node[node_slot[idx]]
                row[:d] = dci * u * i * (1.0 - i)
                row[d : 2 * d] = do * o * (1.0 - o)
                row[2 * d : 3 * d] = dci * i * (1.0 - u * u)
                row[3 * d : 4 * d] = dci * c_cache[idx_l] * f_l * (1.0 - f_l)
                row[4 * d :] = dci * c_cache[idx_r] * f_r * (1.0 - f_r)
                dhh = nw_t @ row
                dh[idx_l] += dhh[:d]
                dh[idx_r] += dhh[d:]
                dc[idx_l] += dci * f_l
                dc[idx_r] += dci * f_r
        if n_nodes:
            _accum_fresh(node_w, dz_node.T @ np.stack(node_children_inputs))
            _accum_fresh(node_b, dz_node.sum(axis=0))
        leaf_inputs = table[np.asarray(leaf_rows, dtype=np.intp)]
        _accum_fresh(leaf_w, dz_leaf.T @ leaf_inputs)
        _accum_fresh(leaf_b, dz_leaf.sum(axis=0))
        dx = dz_leaf @ lw
        np.add.at(_own_grad(embed), np.asarray(leaf_rows, dtype=np.intp), dx)

    parents = (leaf_w, leaf_b, node_w, node_b, embed)
    return Tensor(root_h, parents, backward_fn)


# Compiled sentences: trees become nested (left, right) tuples over embedding
# rows, sequences become flat row lists.  Compiling once lets the training loop
# skip re-walking formulas every epoch.
CompiledTree = Union[int, tuple]
CompiledSentence = Union[CompiledTree, list[int]]

Sentence = Union[Formula, Sequence[str]]


def compile_sentence(config: EncoderConfig, sentence: Sentence) -> CompiledSentence:
    index = config.token_index
    if config.kind in TREE_KINDS:
        if not isinstance(sentence, (Var, Not, Bin)):
            raise TypeError(f"{config.kind} expects a Formula, got {type(sentence).__name__}")
        return _compile_tree(sentence, index)
    if isinstance(sentence, (Var, Not, Bin)):
        tokens: Sequence[str] = render_tokens(sentence)
    else:
        tokens = sentence
    if len(tokens) == 0:
        raise EmptySentenceError("cannot encode an empty token sequence")
    return [index[tok] for tok in tokens]


def _compile_tree(formula: Formula, index: dict[str, int]) -> CompiledTree:
    # Canonical bracketing as a binary tree: "( not C )" pairs the connective
    # leaf with C; "( L ( op R ) )" pairs L with the (op, R) subtree.
    if isinstance(formula, Var):
        return index[f"p{formula.index}"]
    if isinstance(formula, Not):
        return (index["not"], _compile_tree(formula.child, index))
    return (
        _compile_tree(formula.left, index),
        (index[formula.op], _compile_tree(formula.right, index)),
    )


def encode(config: EncoderConfig, store: ParamStore, sentence: Sentence) -> Tensor:
    """Fixed-length vector for one sentence (root h for the LSTM variants)."""
    return encode_compiled(config, store, compile_sentence(config, sentence))


def encode_compiled(config: EncoderConfig, store: ParamStore, compiled: CompiledSentence) -> Tensor:
    kind = config.kind
    embed = store["embed"]
    if kind == "treernn":
        m, b = store["compose.M"], store["compose.b"]

        def walk(node) -> Tensor:
            if isinstance(node, int):
                return embedding_lookup(embed, node)
            return fused_pair_tanh_affine(m, b, walk(node[0]), walk(node[1]))

        return walk(compiled)
    if kind == "treerntn":
        m, b, t = store["compose.M"], store["compose.b"], store["compose.T"]

        def walk(node) -> Tensor:
            if isinstance(node, int):
                return embedding_lookup(embed, node)
            return fused_compose_rntn(m, b, t, walk(node[0]), walk(node[1]))

        return walk(compiled)
    if kind == "treelstm":
        return fused_treelstm_tree(
            store["leaf.W"], store["leaf.b"], store["node.W"], store["node.b"], embed, compiled
        )
    if not compiled:
        raise EmptySentenceError("cannot encode an empty token sequence")
    if kind == "lstm":
        return fused_lstm_sequence(
            store["cell.W"], store["cell.b"], embed, compiled, config.d_hidden
        )
    if kind == "rnn":
        w, b = store["cell.W"], store["cell.b"]
        h = constant(np.zeros(config.d_hidden))
        for row in compiled:
            h = fused_pair_tanh_affine(w, b, embedding_lookup(embed, row), h)
        return h
    # nbow: mean of token embeddings, one tanh projection
    mean = embedding_mean(embed, compiled)
    return tanh(affine(store["proj.W"], mean, store["proj.b"]))
