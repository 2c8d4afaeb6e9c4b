"""Minimal dense-tensor reverse-mode automatic differentiation.

Every operation returns a Tensor that doubles as the graph node: it keeps its
parents and a closure that routes the upstream gradient to them.  Values are
float64 numpy arrays of rank 0..3; graphs are rebuilt per example, so tree
shapes can vary freely.  No broadcasting anywhere: shape mismatches raise.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class ShapeMismatchError(ValueError):
    def __init__(self, op: str, expected, got):
        super().__init__(f"{op}: expected shape {expected}, got {got}")
        self.expected = expected
        self.got = got


class NonScalarLossError(ValueError):
    pass


class Tensor:
    """A value in the computation graph with its accumulated gradient."""

    __slots__ = ("data", "grad", "_grad_owned", "_parents", "_backward")

    def __init__(
        self,
        data: np.ndarray,
        parents: tuple["Tensor", ...] = (),
        backward_fn: Callable[[np.ndarray], None] | None = None,
    ):
        self.data = data
        self.grad: np.ndarray | None = None
        self._grad_owned = False
        self._parents = parents
        self._backward = backward_fn

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, leaf={self._backward is None})"


def constant(values) -> Tensor:
    """Leaf tensor from raw values; gradients stop here."""
    data = np.asarray(values, dtype=np.float64)
    if data.ndim > 3:
        raise ShapeMismatchError("constant", "rank <= 3", data.shape)
    return Tensor(data)


def _accum(t: Tensor, g: np.ndarray) -> None:
    """Accumulate a contribution that may be shared with other nodes.

    A shared array is never mutated: the node's grad only becomes writable
    (owned) once accumulation has allocated a fresh sum.
    """
    if t.grad is None:
        t.grad = g
        t._grad_owned = False
    elif t._grad_owned:
        t.grad += g
    else:
        t.grad = t.grad + g
        t._grad_owned = True


def _accum_fresh(t: Tensor, g: np.ndarray) -> None:
    """Accumulate a freshly allocated contribution the node may adopt."""
    if t.grad is None:
        t.grad = g
        t._grad_owned = True
    elif t._grad_owned:
        t.grad += g
    else:
        t.grad = t.grad + g
        t._grad_owned = True


def _own_grad(t: Tensor) -> np.ndarray:
    """Writable gradient buffer for t, copying a shared array if needed."""
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
        t._grad_owned = True
    elif not t._grad_owned:
        t.grad = t.grad.copy()
        t._grad_owned = True
    return t.grad


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeMismatchError("add", a.data.shape, b.data.shape)

    def backward_fn(g: np.ndarray) -> None:
        _accum(a, g)
        _accum(b, g)

    return Tensor(a.data + b.data, (a, b), backward_fn)


def add_n(tensors: Sequence[Tensor]) -> Tensor:
    """Elementwise sum of one or more same-shape tensors."""
    if not tensors:
        raise ValueError("add_n needs at least one tensor")
    first = tensors[0]
    for t in tensors[1:]:
        if t.data.shape != first.data.shape:
            raise ShapeMismatchError("add_n", first.data.shape, t.data.shape)
    out = first.data.copy()
    for t in tensors[1:]:
        out += t.data

    def backward_fn(g: np.ndarray) -> None:
        for t in tensors:
            _accum(t, g)

    return Tensor(out, tuple(tensors), backward_fn)


def scale(c: float, x: Tensor) -> Tensor:
    c = float(c)

    def backward_fn(g: np.ndarray) -> None:
        _accum_fresh(x, c * g)

    return Tensor(c * x.data, (x,), backward_fn)


def concat(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 1 or b.data.ndim != 1:
        raise ShapeMismatchError("concat", "two rank-1 tensors", (a.data.shape, b.data.shape))
    n = a.data.shape[0]

    def backward_fn(g: np.ndarray) -> None:
        _accum(a, g[:n])
        _accum(b, g[n:])

    return Tensor(np.concatenate((a.data, b.data)), (a, b), backward_fn)


def slice1d(x: Tensor, start: int, stop: int) -> Tensor:
    if x.data.ndim != 1:
        raise ShapeMismatchError("slice1d", "rank-1 tensor", x.data.shape)
    if not 0 <= start <= stop <= x.data.shape[0]:
        raise ValueError(f"slice [{start}:{stop}] out of range for {x.data.shape}")

    def backward_fn(g: np.ndarray) -> None:
        full = np.zeros_like(x.data)
        full[start:stop] = g
        _accum_fresh(x, full)

    return Tensor(x.data[start:stop], (x,), backward_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim not in (1, 2):
        raise ShapeMismatchError("matmul", "(m,n) @ (n,) or (n,p)", (a.data.shape, b.data.shape))
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatchError("matmul", a.data.shape, b.data.shape)

    if b.data.ndim == 1:

        def backward_fn(g: np.ndarray) -> None:
            _accum_fresh(a, np.outer(g, b.data))
            _accum_fresh(b, a.data.T @ g)

    else:

        def backward_fn(g: np.ndarray) -> None:
            _accum_fresh(a, g @ b.data.T)
            _accum_fresh(b, a.data.T @ g)

    return Tensor(a.data @ b.data, (a, b), backward_fn)


def affine(w: Tensor, x: Tensor, b: Tensor) -> Tensor:
    """w @ x + b for a rank-2 weight, rank-1 input, rank-1 bias."""
    if w.data.ndim != 2 or x.data.ndim != 1 or b.data.ndim != 1:
        raise ShapeMismatchError("affine", "(m,n), (n,), (m,)", (w.data.shape, x.data.shape, b.data.shape))
    if w.data.shape[1] != x.data.shape[0] or w.data.shape[0] != b.data.shape[0]:
        raise ShapeMismatchError("affine", w.data.shape, (x.data.shape, b.data.shape))

    def backward_fn(g: np.ndarray) -> None:
        _accum_fresh(w, np.outer(g, x.data))
        _accum_fresh(x, w.data.T @ g)
        _accum(b, g)

    return Tensor(w.data @ x.data + b.data, (w, x, b), backward_fn)


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeMismatchError("hadamard", a.data.shape, b.data.shape)

    def backward_fn(g: np.ndarray) -> None:
        _accum_fresh(a, g * b.data)
        _accum_fresh(b, g * a.data)

    return Tensor(a.data * b.data, (a, b), backward_fn)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def backward_fn(g: np.ndarray) -> None:
        _accum_fresh(x, g * (1.0 - out * out))

    return Tensor(out, (x,), backward_fn)


def _sigmoid_values(x: np.ndarray) -> np.ndarray:
    # exp of a non-positive argument on both branches: no overflow.
    t = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + t), t / (1.0 + t))


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid_values(x.data)

    def backward_fn(g: np.ndarray) -> None:
        _accum_fresh(x, g * out * (1.0 - out))

    return Tensor(out, (x,), backward_fn)


def bilinear_tensor_form(x: Tensor, t: Tensor, y: Tensor) -> Tensor:
    """out[k] = sum_ij x[i] * t[k,i,j] * y[j] for a rank-3 parameter t."""
    if x.data.ndim != 1 or y.data.ndim != 1 or t.data.ndim != 3:
        raise ShapeMismatchError(
            "bilinear_tensor_form", "(m,), (n,m,m), (m,)", (x.data.shape, t.data.shape, y.data.shape)
        )
    n, m1, m2 = t.data.shape
    if m1 != x.data.shape[0] or m2 != y.data.shape[0]:
        raise ShapeMismatchError("bilinear_tensor_form", t.data.shape, (x.data.shape, y.data.shape))

    xy = np.outer(x.data, y.data).reshape(-1)
    out = t.data.reshape(n, -1) @ xy

    def backward_fn(g: np.ndarray) -> None:
        _accum_fresh(t, np.outer(g, xy).reshape(n, m1, m2))
        # tg[i,j] = sum_k g[k] t[k,i,j]
        tg = np.tensordot(g, t.data, axes=([0], [0]))
        _accum_fresh(x, tg @ y.data)
        _accum_fresh(y, tg.T @ x.data)

    return Tensor(out, (x, t, y), backward_fn)


def softmax_nll(logits: Tensor, target: int) -> Tensor:
    """-log softmax(logits)[target], computed with max-subtraction."""
    if logits.data.ndim != 1:
        raise ShapeMismatchError("softmax_nll", "rank-1 logits", logits.data.shape)
    if not 0 <= target < logits.data.shape[0]:
        raise ValueError(f"target {target} out of range for {logits.data.shape[0]} logits")
    shifted = logits.data - logits.data.max()
    exp = np.exp(shifted)
    total = exp.sum()
    probs = exp / total
    loss = np.log(total) - shifted[target]

    def backward_fn(g: np.ndarray) -> None:
        d = probs.copy()
        d[target] -= 1.0
        _accum_fresh(logits, float(g) * d)

    return Tensor(np.float64(loss).reshape(()), (logits,), backward_fn)


def square_sum(x: Tensor) -> Tensor:
    """Scalar sum of squared entries (any rank)."""

    def backward_fn(g: np.ndarray) -> None:
        _accum_fresh(x, (2.0 * float(g)) * x.data)

    return Tensor(np.float64(np.sum(x.data * x.data)).reshape(()), (x,), backward_fn)


def embedding_lookup(table: Tensor, row: int) -> Tensor:
    if table.data.ndim != 2:
        raise ShapeMismatchError("embedding_lookup", "rank-2 table", table.data.shape)
    if not 0 <= row < table.data.shape[0]:
        raise ValueError(f"row {row} out of range for table {table.data.shape}")

    def backward_fn(g: np.ndarray) -> None:
        _own_grad(table)[row] += g

    return Tensor(table.data[row], (table,), backward_fn)


def embedding_mean(table: Tensor, rows: Sequence[int]) -> Tensor:
    """Mean of the given table rows (repeats allowed) as one node."""
    if table.data.ndim != 2:
        raise ShapeMismatchError("embedding_mean", "rank-2 table", table.data.shape)
    if not rows:
        raise ValueError("embedding_mean needs at least one row")
    index = np.asarray(rows, dtype=np.intp)
    if index.min() < 0 or index.max() >= table.data.shape[0]:
        raise ValueError(f"row out of range for table {table.data.shape}")
    out = table.data[index].mean(axis=0)

    def backward_fn(g: np.ndarray) -> None:
        np.add.at(_own_grad(table), index, g / len(rows))

    return Tensor(out, (table,), backward_fn)


# ---------------------------------------------------------------------------
# Row-batched ops: one graph node per minibatch for the downstream classifier,
# instead of one subgraph per example.  Same math as the per-example ops.
# ---------------------------------------------------------------------------


def stack_rows(vectors: Sequence[Tensor]) -> Tensor:
    """Stack rank-1 tensors into an (n, d) matrix."""
    if not vectors:
        raise ValueError("stack_rows needs at least one vector")
    d = vectors[0].data.shape
    for v in vectors:
        if v.data.ndim != 1 or v.data.shape != d:
            raise ShapeMismatchError("stack_rows", d, v.data.shape)
    out = np.stack([v.data for v in vectors])

    def backward_fn(g: np.ndarray) -> None:
        for i, v in enumerate(vectors):
            _accum(v, g[i])

    return Tensor(out, tuple(vectors), backward_fn)


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    """Column-wise concatenation of two (n, *) matrices."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[0] != b.data.shape[0]:
        raise ShapeMismatchError("concat_rows", "(n,da), (n,db)", (a.data.shape, b.data.shape))
    da = a.data.shape[1]

    def backward_fn(g: np.ndarray) -> None:
        _accum(a, g[:, :da])
        _accum(b, g[:, da:])

    return Tensor(np.hstack((a.data, b.data)), (a, b), backward_fn)


def linear_rows(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Row-wise affine map: out[e] = w @ x[e] + b for an (n, m) input."""
    if x.data.ndim != 2 or w.data.ndim != 2 or b.data.ndim != 1:
        raise ShapeMismatchError("linear_rows", "(n,m), (k,m), (k,)", (x.data.shape, w.data.shape, b.data.shape))
    if w.data.shape[1] != x.data.shape[1] or w.data.shape[0] != b.data.shape[0]:
        raise ShapeMismatchError("linear_rows", w.data.shape, (x.data.shape, b.data.shape))

    def backward_fn(g: np.ndarray) -> None:
        _accum_fresh(x, g @ w.data)
        _accum_fresh(w, g.T @ x.data)
        _accum_fresh(b, g.sum(axis=0))

    return Tensor(x.data @ w.data.T + b.data, (x, w, b), backward_fn)


def pair_bilinear_rows(x_l: Tensor, t: Tensor, x_r: Tensor) -> Tensor:
    """Row-wise bilinear form: out[e, k] = sum_ij x_l[e,i] t[k,i,j] x_r[e,j]."""
    if x_l.data.ndim != 2 or x_r.data.ndim != 2 or t.data.ndim != 3:
        raise ShapeMismatchError(
            "pair_bilinear_rows", "(n,m), (k,m,m), (n,m)", (x_l.data.shape, t.data.shape, x_r.data.shape)
        )
    n_rows, m = x_l.data.shape
    k, m1, m2 = t.data.shape
    if x_r.data.shape != (n_rows, m) or m1 != m or m2 != m:
        raise ShapeMismatchError("pair_bilinear_rows", t.data.shape, (x_l.data.shape, x_r.data.shape))

    # xy[e] = outer(x_l[e], x_r[e]) flattened; one GEMM covers the whole batch.
    xy = np.einsum("ei,ej->eij", x_l.data, x_r.data).reshape(n_rows, m * m)
    out = xy @ t.data.reshape(k, m * m).T

    def backward_fn(g: np.ndarray) -> None:
        _accum_fresh(t, (g.T @ xy).reshape(k, m, m))
        dxy = (g @ t.data.reshape(k, m * m)).reshape(n_rows, m, m)
        _accum_fresh(x_l, np.einsum("eij,ej->ei", dxy, x_r.data))
        _accum_fresh(x_r, np.einsum("eij,ei->ej", dxy, x_l.data))

    return Tensor(out, (x_l, t, x_r), backward_fn)


def rows_softmax_nll_mean(logits: Tensor, targets: Sequence[int]) -> Tensor:
    """Mean of row-wise -log softmax(logits[e])[targets[e]]."""
    if logits.data.ndim != 2:
        raise ShapeMismatchError("rows_softmax_nll_mean", "rank-2 logits", logits.data.shape)
    n_rows, n_classes = logits.data.shape
    if len(targets) != n_rows:
        raise ShapeMismatchError("rows_softmax_nll_mean", f"{n_rows} targets", len(targets))
    target_idx = np.asarray(targets, dtype=np.intp)
    if target_idx.size and (target_idx.min() < 0 or target_idx.max() >= n_classes):
        raise ValueError("target out of range")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    totals = exp.sum(axis=1)
    probs = exp / totals[:, None]
    rows = np.arange(n_rows)
    losses = np.log(totals) - shifted[rows, target_idx]
    mean_loss = losses.mean()

    def backward_fn(g: np.ndarray) -> None:
        d = probs.copy()
        d[rows, target_idx] -= 1.0
        _accum_fresh(logits, (float(g) / n_rows) * d)

    return Tensor(np.float64(mean_loss).reshape(()), (logits,), backward_fn)


def topological_order(root: Tensor) -> list[Tensor]:
    """Parents-before-children ordering, iterative so deep chains are safe."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate exact gradients of a scalar loss into every reachable node."""
    if loss.data.shape != ():
        raise NonScalarLossError(f"loss must be scalar, got shape {loss.data.shape}")
    order = topological_order(loss)
    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
