"""Dense float64 tensors with recorded reverse-mode differentiation.

A ``Tape`` records every primitive applied to differentiable tensors during
one forward pass; ``backward`` replays it once in reverse to produce
gradients for all leaves. Tensors without a tape are constants and carry no
gradient.
"""
from __future__ import annotations

from typing import Callable

import numpy as np


class DimensionError(ValueError):
    """Input shapes do not conform to a primitive's shape rules."""


class NumericError(ArithmeticError):
    """A primitive produced (or received) non-finite values."""


class ContractError(ValueError):
    """A caller violated an operation contract (e.g. non-scalar loss)."""


class Tape:
    """Single-writer record of one forward computation."""

    def __init__(self):
        self._entries: list[tuple[int, list[tuple[int, Callable]]]] = []
        self._leaf_shapes: dict[int, tuple[int, ...]] = {}
        self._next = 0

    def _new_id(self) -> int:
        i = self._next
        self._next += 1
        return i

    def leaf(self, values) -> "Tensor":
        """Register a differentiable leaf (a trainable parameter)."""
        t = Tensor(values, tape=self, node_id=self._new_id())
        self._leaf_shapes[t.node_id] = t.values.shape
        return t

    def _record(self, out_id: int, parents: list[tuple[int, Callable]]):
        self._entries.append((out_id, parents))

    def __len__(self):
        return len(self._entries)


class Tensor:
    """Dense real tensor, optionally attached to a computation tape."""

    __slots__ = ("values", "tape", "node_id")

    def __init__(self, values, tape: Tape | None = None, node_id: int | None = None):
        arr = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericError("tensor holds non-finite values")
        self.values = arr
        self.tape = tape
        self.node_id = node_id

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def item(self) -> float:
        return float(self.values.reshape(-1)[0])

    def __repr__(self):
        kind = "leaf/op" if self.tape is not None else "const"
        return f"Tensor(shape={self.shape}, {kind})"


def constant(values) -> Tensor:
    return Tensor(values)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(op: str, out: np.ndarray, parents: list[tuple[Tensor, Callable]]) -> Tensor:
    """Wrap a primitive output, recording it when any input is differentiable."""
    if not np.all(np.isfinite(out)):
        raise NumericError(f"{op}: non-finite output")
    tracked = [(t, vjp) for t, vjp in parents if t.tape is not None]
    if not tracked:
        return Tensor(out)
    tape = tracked[0][0].tape
    for t, _ in tracked[1:]:
        if t.tape is not tape:
            raise ContractError(f"{op}: inputs belong to different tapes")
    res = Tensor(out, tape=tape, node_id=tape._new_id())
    tape._record(res.node_id, [(t.node_id, vjp) for t, vjp in tracked])
    return res


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to the shape of a broadcast input."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# primitives


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    av, bv = a.values, b.values
    out = av @ bv
    return _result("matmul", out, [
        (a, lambda g: g @ bv.T),
        (b, lambda g: av.T @ g),
    ])


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.values + b.values
    except ValueError as exc:
        raise DimensionError(f"add: shapes {a.shape} + {b.shape}") from exc
    return _result("add", out, [
        (a, lambda g: _unbroadcast(g, a.shape)),
        (b, lambda g: _unbroadcast(g, b.shape)),
    ])


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, neg(b))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.values * b.values
    except ValueError as exc:
        raise DimensionError(f"elementwise-multiply: shapes {a.shape} * {b.shape}") from exc
    av, bv = a.values, b.values
    return _result("elementwise-multiply", out, [
        (a, lambda g: _unbroadcast(g * bv, a.shape)),
        (b, lambda g: _unbroadcast(g * av, b.shape)),
    ])


def smul(a: Tensor, c: float) -> Tensor:
    a = _as_tensor(a)
    c = float(c)
    return _result("scalar-multiply", c * a.values, [(a, lambda g: c * g)])


def neg(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    return _result("negate", -a.values, [(a, lambda g: -g)])


def square(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    av = a.values
    return _result("square", av * av, [(a, lambda g: 2.0 * av * g)])


def transpose(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    if a.values.ndim != 2:
        raise DimensionError(f"transpose: expected matrix, got shape {a.shape}")
    return _result("transpose", a.values.T, [(a, lambda g: g.T)])


def relu(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    mask = (a.values > 0).astype(np.float64)
    return _result("relu", a.values * mask, [(a, lambda g: g * mask)])


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # stable logistic via tanh
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softplus(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    x = a.values
    # overflow-safe: max(x, 0) + log1p(exp(-|x|))
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    sig = _sigmoid(x)
    return _result("softplus", out, [(a, lambda g: g * sig)])


def exp(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = np.exp(a.values)
    return _result("exp", out, [(a, lambda g: g * out)])


def log(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    av = a.values
    if np.any(av <= 0):
        raise NumericError("log: non-positive input")
    return _result("log", np.log(av), [(a, lambda g: g / av)])


def tsum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    shape = a.shape

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, shape).copy()
        ge = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(ge, shape).copy()

    return _result("sum", a.values.sum(axis=axis, keepdims=keepdims), [(a, vjp)])


def tmean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    shape = a.shape
    n = a.values.size if axis is None else shape[axis]

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g / n, shape).copy()
        ge = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(ge / n, shape).copy()

    return _result("mean", a.values.mean(axis=axis, keepdims=keepdims), [(a, vjp)])


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("concat-along-axis: empty input list")
    out = np.concatenate([t.values for t in tensors], axis=axis)
    parents = []
    offset = 0
    for t in tensors:
        n = t.shape[axis]
        lo, hi = offset, offset + n

        def vjp(g, lo=lo, hi=hi):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            return g[tuple(sl)]

        parents.append((t, vjp))
        offset += n
    return _result("concat-along-axis", out, parents)


def row_softmax(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    if a.values.ndim != 2:
        raise DimensionError(f"row-softmax: expected matrix, got shape {a.shape}")
    x = a.values
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        return out * (g - (g * out).sum(axis=1, keepdims=True))

    return _result("row-softmax", out, [(a, vjp)])


def segment_softmax(a: Tensor, segments: list[tuple[int, int]]) -> Tensor:
    """Column-wise softmax over the rows of each segment independently."""
    a = _as_tensor(a)
    if a.values.ndim != 2:
        raise DimensionError(f"segment-row-softmax: expected matrix, got shape {a.shape}")
    x = a.values
    out = np.empty_like(x)
    for lo, hi in segments:
        if hi <= lo:
            raise DimensionError("segment-row-softmax: empty segment")
        z = x[lo:hi] - x[lo:hi].max(axis=0, keepdims=True)
        e = np.exp(z)
        out[lo:hi] = e / e.sum(axis=0, keepdims=True)

    def vjp(g):
        gx = np.empty_like(g)
        for lo, hi in segments:
            y = out[lo:hi]
            gs = g[lo:hi]
            gx[lo:hi] = y * (gs - (gs * y).sum(axis=0, keepdims=True))
        return gx

    return _result("segment-row-softmax", out, [(a, vjp)])


def row_l2_normalize(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    if a.values.ndim != 2:
        raise DimensionError(f"row-L2-normalize: expected matrix, got shape {a.shape}")
    x = a.values
    norms = np.sqrt((x * x).sum(axis=1, keepdims=True))
    if np.any(norms < 1e-12):
        raise NumericError("row-L2-normalize: near-zero row norm")
    out = x / norms

    def vjp(g):
        dot = (g * x).sum(axis=1, keepdims=True)
        return g / norms - x * dot / norms**3

    return _result("row-L2-normalize", out, [(a, vjp)])


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    """Column slice of a matrix; supporting primitive for group extraction."""
    a = _as_tensor(a)
    if a.values.ndim != 2:
        raise DimensionError(f"slice-cols: expected matrix, got shape {a.shape}")
    shape = a.shape

    def vjp(g):
        gx = np.zeros(shape)
        gx[:, start:stop] = g
        return gx

    return _result("slice-cols", a.values[:, start:stop].copy(), [(a, vjp)])


PRIMITIVES = {
    "matmul": matmul,
    "add": add,
    "elementwise-multiply": mul,
    "scalar-multiply": smul,
    "transpose": transpose,
    "relu": relu,
    "row-softmax": row_softmax,
    "segment-row-softmax": segment_softmax,
    "softplus": softplus,
    "exp": exp,
    "log": log,
    "sum": tsum,
    "mean": tmean,
    "concat-along-axis": concat,
    "row-L2-normalize": row_l2_normalize,
    "square": square,
    "negate": neg,
}


def primitive_forward(op_kind: str, inputs: list, **kwargs) -> Tensor:
    """Apply a named primitive; entry point for generic dispatch."""
    if op_kind not in PRIMITIVES:
        raise ContractError(f"unknown primitive {op_kind!r}")
    fn = PRIMITIVES[op_kind]
    if op_kind == "concat-along-axis":
        return fn(list(inputs), **kwargs)
    return fn(*inputs, **kwargs)


def backward(tape: Tape, loss: Tensor) -> dict[int, np.ndarray]:
    """Reverse pass: gradient of a scalar loss for every leaf of the tape.

    Leaves that do not influence the loss get zero gradients.
    """
    if loss.values.size != 1:
        raise ContractError(f"backward: loss must be scalar, got shape {loss.shape}")
    if loss.tape is not None and loss.tape is not tape:
        raise ContractError("backward: loss was not produced by this tape")
    grads: dict[int, np.ndarray] = {}
    if loss.node_id is not None:
        grads[loss.node_id] = np.ones_like(loss.values)
    for out_id, parents in reversed(tape._entries):
        g = grads.pop(out_id, None)
        if g is None:
            continue
        for in_id, vjp in parents:
            gi = vjp(g)
            if in_id in grads:
                grads[in_id] = grads[in_id] + gi
            else:
                grads[in_id] = np.asarray(gi, dtype=np.float64)
    return {
        lid: grads.get(lid, np.zeros(shape))
        for lid, shape in tape._leaf_shapes.items()
    }
