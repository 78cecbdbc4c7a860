"""Reverse-mode automatic differentiation over dense float64 tensors.

A Tensor is one entry on an implicit tape: construction order gives ids,
and every op's parents were constructed before the op's output, so the
tape is topologically ordered by id. ``backward`` walks the entries
reachable from a scalar root in descending id order and accumulates
gradients. Gradients add up across backward calls; callers reset with
``zero_grad``.

Ops are plain functions returning new Tensors. Each closes over the data
it needs for its backward rule. Segment ops (per-destination reductions
and softmax) are the message-passing primitives; everything else is
standard dense arithmetic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

_ids = itertools.count()


class Tensor:
    """Dense float64 array plus its position and backward rule on the tape."""

    __slots__ = ("data", "id", "parents", "grad", "op", "_backward")

    def __init__(self, data, parents=(), backward=None, op="leaf"):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.id = next(_ids)
        self.parents = tuple(parents)
        self.grad = None  # lazily allocated accumulator, same shape as data
        self.op = op
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self.op!r})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


class Parameter(Tensor):
    """Trainable leaf: the one Tensor whose data the optimizer updates in place."""

    __slots__ = ("name",)

    def __init__(self, data, name=""):
        super().__init__(np.array(data, dtype=np.float64), op="param")
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def backward(root: Tensor) -> None:
    """Propagate d(root)/d(node) to every tape entry reachable from root.

    Seeds the root with 1, visits entries in reverse construction order,
    and adds this pass's contribution into each entry's ``grad``. Custom
    backward rules run exactly once per entry, after the entry's full
    upstream gradient for this pass has been gathered.
    """
    if root.data.size != 1:
        raise ValueError(f"backward root must be scalar, got shape {root.data.shape}")

    nodes: dict[int, Tensor] = {}
    stack = [root]
    while stack:
        t = stack.pop()
        if t.id not in nodes:
            nodes[t.id] = t
            stack.extend(t.parents)

    pending: dict[int, np.ndarray] = {root.id: np.ones_like(root.data)}

    def accum(t: Tensor, g) -> None:
        prev = pending.get(t.id)
        pending[t.id] = g if prev is None else prev + g

    for tid in sorted(nodes, reverse=True):
        g = pending.pop(tid, None)
        if g is None:
            continue  # no gradient path from root
        node = nodes[tid]
        if node.grad is None:
            node.grad = np.zeros_like(node.data)
        node.grad += g
        if node._backward is not None:
            node._backward(g, accum)


# ---------------------------------------------------------------------------
# broadcasting helpers for binary elementwise ops
#
# Supported pairings: identical shapes; a length-n (or nx1) vector against an
# nxd matrix, applied per row; a 1xd row against an nxd matrix, applied down
# the rows. The (n,) case is deliberately per-row (factor-per-node semantics),
# not numpy's trailing-axis alignment.
# ---------------------------------------------------------------------------


def _align(small: np.ndarray, big_shape):
    """Return (broadcast view of small, reducer mapping a big-shaped grad back)."""
    s, b = small.shape, big_shape
    if s == b:
        return small, lambda g: g
    if len(b) == 2:
        n, d = b
        if s == (n,):
            return small[:, None], lambda g: g.sum(axis=1)
        if s == (n, 1) and d != 1:
            return small, lambda g: g.sum(axis=1, keepdims=True)
        if s == (1, d) and n != 1:
            return small, lambda g: g.sum(axis=0, keepdims=True)
    raise ShapeError(f"cannot broadcast {s} against {b}")


def _binary(a: Tensor, b: Tensor, opname, f, dfa, dfb):
    if a.data.shape == b.data.shape:
        av, bv = a.data, b.data
        ra = rb = lambda g: g
    elif a.data.size >= b.data.size:
        av = a.data
        ra = lambda g: g
        bv, rb = _align(b.data, a.data.shape)
    else:
        bv = b.data
        rb = lambda g: g
        av, ra = _align(a.data, b.data.shape)
    out = f(av, bv)

    def bwd(g, accum):
        accum(a, ra(dfa(g, av, bv)))
        accum(b, rb(dfb(g, av, bv)))

    return Tensor(out, parents=(a, b), backward=bwd, op=opname)


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, "add", lambda x, y: x + y,
                   lambda g, x, y: g, lambda g, x, y: g)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, "sub", lambda x, y: x - y,
                   lambda g, x, y: g, lambda g, x, y: -g)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, "mul", lambda x, y: x * y,
                   lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"div requires equal shapes, got {a.data.shape} and {b.data.shape}")
    out = a.data / b.data

    def bwd(g, accum):
        accum(a, g / b.data)
        accum(b, -g * a.data / (b.data * b.data))

    return Tensor(out, parents=(a, b), backward=bwd, op="div")


def _unary(x: Tensor, opname, f, df):
    out = f(x.data)

    def bwd(g, accum):
        accum(x, g * df(x.data, out))

    return Tensor(out, parents=(x,), backward=bwd, op=opname)


def relu(x: Tensor) -> Tensor:
    # derivative at exactly 0 is 0
    return _unary(x, "relu", lambda v: np.maximum(v, 0.0),
                  lambda v, o: (v > 0).astype(np.float64))


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    return _unary(x, "leaky_relu",
                  lambda v: np.where(v > 0, v, slope * v),
                  lambda v, o: np.where(v > 0, 1.0, slope))


def elu(x: Tensor) -> Tensor:
    return _unary(x, "elu",
                  lambda v: np.where(v > 0, v, np.expm1(v)),
                  lambda v, o: np.where(v > 0, 1.0, o + 1.0))


def sigmoid(x: Tensor) -> Tensor:
    return _unary(x, "sigmoid",
                  lambda v: 1.0 / (1.0 + np.exp(-v)),
                  lambda v, o: o * (1.0 - o))


def tanh(x: Tensor) -> Tensor:
    return _unary(x, "tanh", np.tanh, lambda v, o: 1.0 - o * o)


_ELEMENTWISE = {"add": add, "sub": sub, "mul": mul, "div": div,
                "relu": relu, "sigmoid": sigmoid, "tanh": tanh,
                "leaky_relu": leaky_relu, "elu": elu}


def elementwise(kind: str, a: Tensor, b: Tensor | None = None) -> Tensor:
    """Dispatch by op-kind name; binary kinds require b."""
    f = _ELEMENTWISE[kind]
    return f(a) if b is None else f(a, b)


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a python constant (no gradient to c)."""
    out = x.data * c

    def bwd(g, accum):
        accum(x, g * c)

    return Tensor(out, parents=(x,), backward=bwd, op="scale")


def add_scalar(x: Tensor, c: float) -> Tensor:
    out = x.data + c

    def bwd(g, accum):
        accum(x, g)

    return Tensor(out, parents=(x,), backward=bwd, op="add_scalar")


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[0] != b.data.shape[0]:
        raise ShapeError(f"concat_cols needs matching rows, got {a.data.shape} and {b.data.shape}")
    d1 = a.data.shape[1]
    out = np.concatenate([a.data, b.data], axis=1)

    def bwd(g, accum):
        accum(a, g[:, :d1])
        accum(b, g[:, d1:])

    return Tensor(out, parents=(a, b), backward=bwd, op="concat_cols")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul shapes {a.data.shape} and {b.data.shape} do not chain")
    out = a.data @ b.data

    def bwd(g, accum):
        accum(a, g @ b.data.T)
        accum(b, a.data.T @ g)

    return Tensor(out, parents=(a, b), backward=bwd, op="matmul")


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    """Select rows of x by index; backward scatter-adds into the sources."""
    idx = np.asarray(idx, dtype=np.int64)
    n = x.data.shape[0]
    _check_indices(idx, n)
    out = x.data[idx]

    def bwd(g, accum):
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        accum(x, gx)

    return Tensor(out, parents=(x,), backward=bwd, op="gather_rows")


def _check_indices(idx: np.ndarray, n: int) -> None:
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        bad = int(np.flatnonzero((idx < 0) | (idx >= n))[0])
        raise IndexError(f"edge {bad}: destination {int(idx[bad])} outside [0, {n})")


def segment_reduce(values: Tensor, dst: np.ndarray, n: int, kind: str = "sum") -> Tensor:
    """Per-destination reduction: row i of the result combines the value rows
    whose dst index is i. Destinations with no incoming rows stay zero (for
    mean too, by convention)."""
    if kind not in ("sum", "mean"):
        raise ValueError(f"unknown segment_reduce kind {kind!r}")
    dst = np.asarray(dst, dtype=np.int64)
    _check_indices(dst, n)
    out = np.zeros((n, values.data.shape[1]), dtype=np.float64)
    np.add.at(out, dst, values.data)
    counts = np.bincount(dst, minlength=n).astype(np.float64)
    if kind == "mean":
        nz = counts > 0
        out[nz] /= counts[nz, None]

    def bwd(g, accum):
        gv = g[dst]
        if kind == "mean":
            gv = gv / counts[dst, None]
        accum(values, gv)

    return Tensor(out, parents=(values,), backward=bwd, op=f"segment_{kind}")


def segment_softmax(scores: Tensor, dst: np.ndarray, n: int) -> Tensor:
    """Softmax over each destination's incoming rows, column by column,
    with per-segment max subtraction for stability."""
    dst = np.asarray(dst, dtype=np.int64)
    _check_indices(dst, n)
    s = scores.data
    seg_max = np.full((n, s.shape[1]), -np.inf)
    np.maximum.at(seg_max, dst, s)
    z = np.exp(s - seg_max[dst])
    den = np.zeros((n, s.shape[1]), dtype=np.float64)
    np.add.at(den, dst, z)
    w = z / den[dst]

    def bwd(g, accum):
        # d softmax: w * (g - sum over the segment of w*g)
        t = np.zeros((n, s.shape[1]), dtype=np.float64)
        np.add.at(t, dst, w * g)
        accum(scores, w * (g - t[dst]))

    return Tensor(w, parents=(scores,), backward=bwd, op="segment_softmax")


def sum_all(x: Tensor) -> Tensor:
    out = np.asarray(x.data.sum())

    def bwd(g, accum):
        accum(x, np.full_like(x.data, float(g)))

    return Tensor(out, parents=(x,), backward=bwd, op="sum_all")


# ---------------------------------------------------------------------------
# batch normalization
# ---------------------------------------------------------------------------


@dataclass
class BatchNormState:
    """Running statistics for one normalized feature block."""

    dim: int
    eps: float = 1e-5
    momentum: float = 0.1
    running_mean: np.ndarray = field(init=False)
    running_var: np.ndarray = field(init=False)

    def __post_init__(self):
        self.running_mean = np.zeros(self.dim, dtype=np.float64)
        self.running_var = np.ones(self.dim, dtype=np.float64)

    def copy(self) -> "BatchNormState":
        st = BatchNormState(self.dim, self.eps, self.momentum)
        st.running_mean = self.running_mean.copy()
        st.running_var = self.running_var.copy()
        return st


def batch_norm(x: Tensor, gamma: Parameter, beta: Parameter,
               state: BatchNormState, phase: str) -> Tensor:
    """Normalize columns by batch statistics (train) or running statistics
    (eval), then apply the learnable scale and shift. Train mode updates the
    running statistics in place (unbiased variance, like the usual framework
    convention)."""
    n = x.data.shape[0]
    if phase == "train":
        if n < 2:
            raise ValueError(f"batch_norm needs at least 2 rows in train phase, got {n}")
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        inv_std = 1.0 / np.sqrt(var + state.eps)
        xhat = (x.data - mu) * inv_std
        m = state.momentum
        state.running_mean = (1 - m) * state.running_mean + m * mu
        state.running_var = (1 - m) * state.running_var + m * var * n / (n - 1)
    elif phase == "eval":
        inv_std = 1.0 / np.sqrt(state.running_var + state.eps)
        xhat = (x.data - state.running_mean) * inv_std
    else:
        raise ValueError(f"unknown phase {phase!r}")
    out = gamma.data * xhat + beta.data

    def bwd(g, accum):
        accum(gamma, (g * xhat).sum(axis=0))
        accum(beta, g.sum(axis=0))
        gxhat = g * gamma.data
        if phase == "train":
            accum(x, inv_std / n * (n * gxhat - gxhat.sum(axis=0)
                                    - xhat * (gxhat * xhat).sum(axis=0)))
        else:
            accum(x, gxhat * inv_std)

    return Tensor(out, parents=(x, gamma, beta), backward=bwd, op="batch_norm")


# ---------------------------------------------------------------------------
# loss heads (fused for numerical stability)
# ---------------------------------------------------------------------------


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray,
                          class_weights: np.ndarray | None = None) -> Tensor:
    """Mean cross-entropy over rows; with class weights, the weighted mean
    (normalized by the sum of per-row weights)."""
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.data.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape} does not match {n} rows")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        bad = int(np.flatnonzero((labels < 0) | (labels >= k))[0])
        raise ValueError(f"label {int(labels[bad])} at row {bad} outside [0, {k})")
    m = logits.data.max(axis=1, keepdims=True)
    shifted = logits.data - m
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    sw = np.ones(n) if class_weights is None else np.asarray(class_weights, dtype=np.float64)[labels]
    denom = sw.sum()
    out = np.asarray(-(sw * logp[np.arange(n), labels]).sum() / denom)

    def bwd(g, accum):
        p = np.exp(logp)
        p[np.arange(n), labels] -= 1.0
        accum(logits, p * (sw / denom)[:, None] * float(g))

    return Tensor(out, parents=(logits,), backward=bwd, op="cross_entropy")


def l1_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    """Mean absolute error against a constant target (subgradient 0 at ties)."""
    target = np.asarray(target, dtype=np.float64)
    if target.shape != pred.data.shape:
        raise ShapeError(f"target shape {target.shape} does not match {pred.data.shape}")
    diff = pred.data - target
    out = np.asarray(np.abs(diff).mean())

    def bwd(g, accum):
        accum(pred, np.sign(diff) / diff.size * float(g))

    return Tensor(out, parents=(pred,), backward=bwd, op="l1_loss")
