"""Dense-matrix reverse-mode automatic differentiation.

Define-by-run: every operation appends a backward closure to the output
tensor, and ``backward()`` replays the implicit tape in reverse
topological order. Values are 64-bit row-major numpy arrays, always 2-D
(scalars are 1x1). Broadcasting is restricted to scalar*matrix, row-vector
bias, and constant per-row scaling; everything else requires exact shapes
so the gradient rules stay auditable.
"""

from __future__ import annotations

import numpy as np

from . import _kernels

CLAMP_EPS = 1e-12


class NumericError(ValueError):
    """A forward operation produced NaN/Inf or violated a domain guard."""


class ShapeError(ValueError):
    pass


def _as_matrix(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


def _check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values produced by '{op}'")
    return arr


class Tensor:
    """A node in the differentiation graph."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(self, value, requires_grad=False, _parents=(), _backward=None, _op="leaf"):
        self.value = _check_finite(_as_matrix(value), _op)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward
        self._op = _op

    @property
    def shape(self):
        return self.value.shape

    @property
    def rows(self):
        return self.value.shape[0]

    @property
    def cols(self):
        return self.value.shape[1]

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError("item() requires a scalar tensor")
        return float(self.value[0, 0])

    def detach(self) -> "Tensor":
        return Tensor(self.value.copy())

    def _accumulate(self, grad: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += grad

    def backward(self, seed=None):
        """Reverse-topological sweep seeding d(self)/d(self)."""
        if seed is None:
            if self.value.size != 1:
                raise ShapeError("backward() without a seed requires a scalar output")
            seed = np.ones_like(self.value)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self._accumulate(np.asarray(seed, dtype=np.float64).reshape(self.shape))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op}, requires_grad={self.requires_grad})"


def tensor(value, requires_grad=False) -> Tensor:
    return Tensor(value, requires_grad=requires_grad)


def constant(value) -> Tensor:
    return Tensor(value)


def zero_grads(params):
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# binary ops


def _binary(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    # row-vector bias: b of shape (1, c) broadcasts over the rows of a
    bias = b.rows == 1 and a.rows != 1 and a.cols == b.cols
    if not bias:
        _binary(a, b, "add")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g.sum(axis=0, keepdims=True) if bias else g)

    return Tensor(a.value + b.value, _parents=(a, b), _backward=backward, _op="add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _binary(a, b, "sub")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(-g)

    return Tensor(a.value - b.value, _parents=(a, b), _backward=backward, _op="sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _binary(a, b, "mul")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * b.value)
        if b.requires_grad:
            b._accumulate(g * a.value)

    return Tensor(a.value * b.value, _parents=(a, b), _backward=backward, _op="mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * c)

    return Tensor(a.value * c, _parents=(a,), _backward=backward, _op="scale")


def scale_rows(a: Tensor, coeffs: np.ndarray) -> Tensor:
    """Multiply row i by the constant coeffs[i]; no gradient to coeffs."""
    coeffs = np.asarray(coeffs, dtype=np.float64).reshape(-1, 1)
    if coeffs.shape[0] != a.rows:
        raise ShapeError("scale_rows: coefficient length mismatch")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * coeffs)

    return Tensor(a.value * coeffs, _parents=(a,), _backward=backward, _op="scale_rows")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise ShapeError(f"matmul: inner dims {a.cols} != {b.rows}")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.value.T)
        if b.requires_grad:
            b._accumulate(a.value.T @ g)

    return Tensor(a.value @ b.value, _parents=(a, b), _backward=backward, _op="matmul")


# ---------------------------------------------------------------------------
# elementwise ops


def exp(a: Tensor) -> Tensor:
    # overflow produces inf, which the Tensor finiteness check reports
    with np.errstate(over="ignore"):
        out = np.exp(a.value)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * out)

    return Tensor(out, _parents=(a,), _backward=backward, _op="exp")


def log(a: Tensor) -> Tensor:
    # clamp keeps x*log(x) -> 0 well behaved as x -> 0
    clamped = np.maximum(a.value, CLAMP_EPS)
    out = np.log(clamped)

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.where(a.value > CLAMP_EPS, g / clamped, 0.0))

    return Tensor(out, _parents=(a,), _backward=backward, _op="log")


def sqrt(a: Tensor) -> Tensor:
    clamped = np.maximum(a.value, CLAMP_EPS)
    out = np.sqrt(clamped)

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.where(a.value > CLAMP_EPS, 0.5 * g / out, 0.0))

    return Tensor(out, _parents=(a,), _backward=backward, _op="sqrt")


def square(a: Tensor) -> Tensor:
    def backward(g):
        if a.requires_grad:
            a._accumulate(2.0 * g * a.value)

    return Tensor(a.value**2, _parents=(a,), _backward=backward, _op="square")


def sigmoid(a: Tensor) -> Tensor:
    out = np.empty_like(a.value)
    pos = a.value >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a.value[pos]))
    ez = np.exp(a.value[~pos])
    out[~pos] = ez / (1.0 + ez)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * out * (1.0 - out))

    return Tensor(out, _parents=(a,), _backward=backward, _op="sigmoid")


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    return Tensor(np.where(mask, a.value, 0.0), _parents=(a,), _backward=backward, _op="relu")


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    mask = a.value > 0

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * np.where(mask, 1.0, slope))

    return Tensor(
        np.where(mask, a.value, slope * a.value), _parents=(a,), _backward=backward, _op="leaky_relu"
    )


def elu(a: Tensor, alpha: float = 1.0) -> Tensor:
    mask = a.value > 0
    expm1 = alpha * np.expm1(np.minimum(a.value, 0.0))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * np.where(mask, 1.0, expm1 + alpha))

    return Tensor(np.where(mask, a.value, expm1), _parents=(a,), _backward=backward, _op="elu")


# ---------------------------------------------------------------------------
# reductions and row ops


def sum(a: Tensor, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy naming
    if axis is None:
        out = a.value.sum().reshape(1, 1)
    elif axis == 0:
        out = a.value.sum(axis=0, keepdims=True)
    elif axis == 1:
        out = a.value.sum(axis=1, keepdims=True)
    else:
        raise ShapeError("sum: axis must be None, 0, or 1")

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.broadcast_to(g, a.shape).copy())

    return Tensor(out, _parents=(a,), _backward=backward, _op="sum")


def mean(a: Tensor, axis=None) -> Tensor:
    n = a.value.size if axis is None else a.shape[axis]
    return scale(sum(a, axis=axis), 1.0 / n)


def rowwise_l2(a: Tensor) -> Tensor:
    """Column vector of euclidean row norms."""
    return sqrt(sum(square(a), axis=1))


def row_normalize(a: Tensor, eps: float = 1e-12) -> Tensor:
    """Scale each row to (near) unit euclidean length."""
    norms = np.sqrt((a.value**2).sum(axis=1, keepdims=True)) + eps
    out = a.value / norms

    def backward(g):
        if a.requires_grad:
            dot = (g * out).sum(axis=1, keepdims=True)
            a._accumulate((g - out * dot) / norms)

    return Tensor(out, _parents=(a,), _backward=backward, _op="row_normalize")


def softmax_vector(a: Tensor) -> Tensor:
    """Softmax over all entries of a single row or column vector."""
    if 1 not in a.shape:
        raise ShapeError("softmax_vector expects a vector-shaped tensor")
    shifted = a.value - a.value.max()
    e = np.exp(shifted)
    out = e / e.sum()

    def backward(g):
        if a.requires_grad:
            a._accumulate(out * (g - (g * out).sum()))

    return Tensor(out, _parents=(a,), _backward=backward, _op="softmax_vector")


def gather_rows(a: Tensor, index) -> Tensor:
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= a.rows):
        raise IndexError("gather_rows: row index out of range")

    def backward(g):
        if a.requires_grad:
            acc = np.zeros_like(a.value)
            np.add.at(acc, index, g)
            a._accumulate(acc)

    return Tensor(a.value[index], _parents=(a,), _backward=backward, _op="gather_rows")


# ---------------------------------------------------------------------------
# sparse aggregation


def spmm(rows, cols, x: Tensor, n_out: int, weights: Tensor | None = None) -> Tensor:
    """y[i] = sum over edges (i, j) of w_ij * x[j].

    ``rows``/``cols`` are aligned int arrays (a directed edge list);
    ``weights`` defaults to all-ones and receives gradients when given as
    a differentiable tensor.
    """
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    if rows.shape != cols.shape or rows.ndim != 1:
        raise ShapeError("spmm: rows/cols must be aligned 1-D arrays")
    if rows.size:
        if rows.min() < 0 or rows.max() >= n_out:
            raise IndexError("spmm: row index out of range")
        if cols.min() < 0 or cols.max() >= x.rows:
            raise IndexError("spmm: column index out of range")
    if weights is not None and weights.value.size != rows.size:
        raise ShapeError("spmm: one weight per edge required")
    w = np.ones(rows.size) if weights is None else weights.value.reshape(-1)
    w = np.ascontiguousarray(w)
    out = np.zeros((n_out, x.cols))
    _kernels.spmm_forward(rows, cols, w, x.value, out)
    parents = (x,) if weights is None else (x, weights)

    def backward(g):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            gx = np.zeros_like(x.value)
            _kernels.spmm_backward_x(rows, cols, w, g, gx)
            x._accumulate(gx)
        if weights is not None and weights.requires_grad:
            gw = np.zeros(rows.size)
            _kernels.spmm_backward_weights(rows, cols, x.value, g, gw)
            weights._accumulate(gw.reshape(weights.shape))

    return Tensor(out, _parents=parents, _backward=backward, _op="spmm")


def segment_softmax(scores: Tensor, segment_ids, n_segments: int) -> Tensor:
    """Softmax of a score column within contiguous, sorted segments."""
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    if scores.cols != 1 or segment_ids.shape != (scores.rows,):
        raise ShapeError("segment_softmax: scores (E,1) with aligned segment ids")
    if np.any(np.diff(segment_ids) < 0):
        raise ShapeError("segment_softmax: segment ids must be sorted")
    v = scores.value[:, 0]
    seg_max = np.full(n_segments, -np.inf)
    np.maximum.at(seg_max, segment_ids, v)
    e = np.exp(v - seg_max[segment_ids])
    seg_sum = np.zeros(n_segments)
    np.add.at(seg_sum, segment_ids, e)
    out = (e / seg_sum[segment_ids]).reshape(-1, 1)

    def backward(g):
        if scores.requires_grad:
            gv = g[:, 0]
            seg_dot = np.zeros(n_segments)
            np.add.at(seg_dot, segment_ids, gv * out[:, 0])
            scores._accumulate((out[:, 0] * (gv - seg_dot[segment_ids])).reshape(-1, 1))

    return Tensor(out, _parents=(scores,), _backward=backward, _op="segment_softmax")


def append_rows_const(a: Tensor, const_rows) -> Tensor:
    """Stack constant rows below a; gradients flow only to a's slice."""
    const_rows = _as_matrix(const_rows)
    if const_rows.shape[1] != a.cols:
        raise ShapeError("append_rows_const: column mismatch")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g[: a.rows])

    return Tensor(
        np.concatenate([a.value, const_rows], axis=0),
        _parents=(a,),
        _backward=backward,
        _op="append_rows_const",
    )


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.rows != b.rows:
        raise ShapeError("concat_cols: row mismatch")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g[:, : a.cols])
        if b.requires_grad:
            b._accumulate(g[:, a.cols :])

    return Tensor(
        np.concatenate([a.value, b.value], axis=1), _parents=(a, b), _backward=backward, _op="concat"
    )
