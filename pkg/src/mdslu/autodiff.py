"""Dense float64 tensors with reverse-mode autodiff on an explicit tape.

Every model computation is built from the operations in this module.
Recording is opt-in: with no active tape (evaluation) the ops run as plain
numpy and build no graph. A tape can be consumed by backward() exactly once.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .rng import Pcg32


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class GraphError(RuntimeError):
    """Misuse of the tape / backward machinery."""


class Tensor:
    """Dense float64 array plus gradient bookkeeping.

    `grad` is populated by backward() and holds an array of the same shape.
    `requires_grad` marks leaves (parameters) and anything derived from
    them while a tape is active.
    """

    __slots__ = ("data", "grad", "requires_grad", "_tape")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Arithmetic sugar; constants wrap as non-grad tensors.
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __neg__(self):
        return affine(self, -1.0, 0.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def param(data, rng: Pcg32 | None = None) -> Tensor:
    """Leaf tensor that collects gradients."""
    return Tensor(data, requires_grad=True)


def uniform_init(rng: Pcg32, shape, fan_in: int) -> Tensor:
    """Weight init: uniform(-sqrt(1/fan_in), +sqrt(1/fan_in))."""
    bound = math.sqrt(1.0 / fan_in)
    return Tensor(rng.uniform_array(shape, -bound, bound), requires_grad=True)


def zeros_param(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


# ---------------------------------------------------------------------------
# Tape


class _Node:
    __slots__ = ("outputs", "fn")

    def __init__(self, outputs, fn):
        self.outputs = outputs
        self.fn = fn


class Tape:
    """Ordered record of executed operations, consumed once by backward."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self._consumed = False

    def __len__(self):
        return len(self._nodes)

    def backward(self, loss: Tensor) -> None:
        """Populate grads of every requires_grad tensor reachable from loss.

        Walks the record in reverse, visiting each operation exactly once.
        Gradients accumulate additively across fan-out. A second call on
        the same tape raises GraphError (double-backward is unsupported).
        """
        if self._consumed:
            raise GraphError("backward was already run on this tape")
        if loss.size != 1:
            raise GraphError(f"loss must be a scalar, got shape {loss.shape}")
        if loss._tape is not self:
            raise GraphError("loss was not recorded on this tape")
        self._consumed = True
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self._nodes):
            if any(o.grad is not None for o in node.outputs):
                node.fn()
        self._nodes.clear()


_ACTIVE: Tape | None = None


@contextmanager
def tape():
    """Install a fresh recording tape for the duration of the block."""
    global _ACTIVE
    if _ACTIVE is not None:
        raise GraphError("tapes do not nest; one recording context at a time")
    t = Tape()
    _ACTIVE = t
    try:
        yield t
    finally:
        _ACTIVE = None


def backward(loss: Tensor) -> None:
    """Backward through the tape that recorded `loss`."""
    if loss._tape is None:
        raise GraphError("loss was not produced through recorded operations")
    loss._tape.backward(loss)


def _tracking(*inputs: Tensor) -> Tape | None:
    t = _ACTIVE
    if t is None:
        return None
    for x in inputs:
        if x.requires_grad:
            return t
    return None


def _out(data, tp: Tape | None) -> Tensor:
    o = Tensor(data, requires_grad=tp is not None)
    o._tape = tp
    return o


def _record(tp: Tape, outputs, fn) -> None:
    tp._nodes.append(_Node(outputs, fn))


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _grad_or_zero(t: Tensor) -> np.ndarray:
    return t.grad if t.grad is not None else np.zeros_like(t.data)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# Elementwise and shape ops


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data
    tp = _tracking(a, b)
    out = _out(out_data, tp)
    if tp:
        def fn():
            g = out.grad
            _accum(a, _unbroadcast(g, a.data.shape))
            _accum(b, _unbroadcast(g, b.data.shape))
        _record(tp, (out,), fn)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data - b.data
    tp = _tracking(a, b)
    out = _out(out_data, tp)
    if tp:
        def fn():
            g = out.grad
            _accum(a, _unbroadcast(g, a.data.shape))
            _accum(b, _unbroadcast(-g, b.data.shape))
        _record(tp, (out,), fn)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data
    tp = _tracking(a, b)
    out = _out(out_data, tp)
    if tp:
        ad, bd = a.data, b.data
        def fn():
            g = out.grad
            _accum(a, _unbroadcast(g * bd, ad.shape))
            _accum(b, _unbroadcast(g * ad, bd.shape))
        _record(tp, (out,), fn)
    return out


def affine(x: Tensor, scale: float, shift: float) -> Tensor:
    """Elementwise scale * x + shift with python-float coefficients."""
    out_data = x.data * scale + shift
    tp = _tracking(x)
    out = _out(out_data, tp)
    if tp:
        def fn():
            _accum(x, out.grad * scale)
        _record(tp, (out,), fn)
    return out


def sigmoid(x: Tensor) -> Tensor:
    xd = x.data
    # Piecewise-stable form avoids exp overflow on large |x|.
    out_data = np.where(xd >= 0, 1.0 / (1.0 + np.exp(-np.abs(xd))),
                        np.exp(-np.abs(xd)) / (1.0 + np.exp(-np.abs(xd))))
    tp = _tracking(x)
    out = _out(out_data, tp)
    if tp:
        y = out_data
        def fn():
            _accum(x, out.grad * y * (1.0 - y))
        _record(tp, (out,), fn)
    return out


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)
    tp = _tracking(x)
    out = _out(out_data, tp)
    if tp:
        y = out_data
        def fn():
            _accum(x, out.grad * (1.0 - y * y))
        _record(tp, (out,), fn)
    return out


def relu(x: Tensor) -> Tensor:
    out_data = np.maximum(x.data, 0.0)
    tp = _tracking(x)
    out = _out(out_data, tp)
    if tp:
        mask = x.data > 0
        def fn():
            _accum(x, out.grad * mask)
        _record(tp, (out,), fn)
    return out


def log(x: Tensor) -> Tensor:
    out_data = np.log(x.data)
    tp = _tracking(x)
    out = _out(out_data, tp)
    if tp:
        xd = x.data
        def fn():
            _accum(x, out.grad / xd)
        _record(tp, (out,), fn)
    return out


def sum_all(x: Tensor) -> Tensor:
    out_data = np.asarray(x.data.sum())
    tp = _tracking(x)
    out = _out(out_data, tp)
    if tp:
        def fn():
            _accum(x, np.full_like(x.data, float(out.grad)))
        _record(tp, (out,), fn)
    return out


def reshape(x: Tensor, shape) -> Tensor:
    out_data = x.data.reshape(shape)
    tp = _tracking(x)
    out = _out(out_data, tp)
    if tp:
        orig = x.data.shape
        def fn():
            _accum(x, out.grad.reshape(orig))
        _record(tp, (out,), fn)
    return out


def transpose(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise DimensionError(f"transpose expects a matrix, got shape {x.shape}")
    out_data = x.data.T
    tp = _tracking(x)
    out = _out(out_data, tp)
    if tp:
        def fn():
            _accum(x, out.grad.T)
        _record(tp, (out,), fn)
    return out


def concat(parts: list[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise DimensionError("concat of zero tensors")
    if axis not in (0, 1):
        raise DimensionError(f"concat axis must be 0 or 1, got {axis}")
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    tp = _tracking(*parts)
    out = _out(out_data, tp)
    if tp:
        widths = [p.data.shape[axis] for p in parts]
        def fn():
            g = out.grad
            off = 0
            for p, w in zip(parts, widths):
                sl = g[off:off + w] if axis == 0 else g[:, off:off + w]
                _accum(p, sl)
                off += w
        _record(tp, (out,), fn)
    return out


def stack_rows(parts: list[Tensor]) -> Tensor:
    """Stack 1-D tensors of equal width into an (n, d) matrix."""
    out_data = np.stack([p.data for p in parts])
    tp = _tracking(*parts)
    out = _out(out_data, tp)
    if tp:
        def fn():
            g = out.grad
            for i, p in enumerate(parts):
                _accum(p, g[i])
        _record(tp, (out,), fn)
    return out


def slice1d(x: Tensor, start: int, stop: int) -> Tensor:
    if x.data.ndim != 1:
        raise DimensionError(f"slice1d expects a vector, got shape {x.shape}")
    out_data = x.data[start:stop].copy()
    tp = _tracking(x)
    out = _out(out_data, tp)
    if tp:
        def fn():
            g = np.zeros_like(x.data)
            g[start:stop] = out.grad
            _accum(x, g)
        _record(tp, (out,), fn)
    return out


def row(x: Tensor, i: int) -> Tensor:
    if x.data.ndim != 2:
        raise DimensionError(f"row expects a matrix, got shape {x.shape}")
    out_data = x.data[i].copy()
    tp = _tracking(x)
    out = _out(out_data, tp)
    if tp:
        def fn():
            g = np.zeros_like(x.data)
            g[i] = out.grad
            _accum(x, g)
        _record(tp, (out,), fn)
    return out


def get(x: Tensor, i: int) -> Tensor:
    """Scalar element of a vector."""
    if x.data.ndim != 1:
        raise DimensionError(f"get expects a vector, got shape {x.shape}")
    out_data = np.asarray(x.data[i])
    tp = _tracking(x)
    out = _out(out_data, tp)
    if tp:
        def fn():
            g = np.zeros_like(x.data)
            g[i] = float(out.grad)
            _accum(x, g)
        _record(tp, (out,), fn)
    return out


# ---------------------------------------------------------------------------
# Linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if ad.ndim not in (1, 2) or bd.ndim not in (1, 2):
        raise DimensionError(
            f"matmul supports vectors and matrices, got shapes {ad.shape} and {bd.shape}")
    if ad.shape[-1] != bd.shape[0]:
        raise DimensionError(
            f"matmul shapes {ad.shape} and {bd.shape}: inner dimensions differ")
    out_data = ad @ bd
    tp = _tracking(a, b)
    out = _out(out_data, tp)
    if tp:
        def fn():
            A = ad if ad.ndim == 2 else ad[None, :]
            B = bd if bd.ndim == 2 else bd[:, None]
            G = out.grad.reshape(A.shape[0], B.shape[1])
            da = G @ B.T
            db = A.T @ G
            _accum(a, da if ad.ndim == 2 else da[0])
            _accum(b, db if bd.ndim == 2 else db[:, 0])
        _record(tp, (out,), fn)
    return out


def softmax_rows(x: Tensor) -> Tensor:
    """Row-stabilized softmax; a 1-D input is treated as a single row."""
    xd = x.data
    shifted = xd - xd.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=-1, keepdims=True)
    tp = _tracking(x)
    out = _out(out_data, tp)
    if tp:
        y = out_data
        def fn():
            g = out.grad
            dot = (g * y).sum(axis=-1, keepdims=True)
            _accum(x, y * (g - dot))
        _record(tp, (out,), fn)
    return out


# ---------------------------------------------------------------------------
# Lookup, dropout, LSTM


def embedding_lookup(table: Tensor, ids) -> Tensor:
    idx = np.asarray(ids, dtype=np.intp)
    out_data = table.data[idx]
    tp = _tracking(table)
    out = _out(out_data, tp)
    if tp:
        def fn():
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, idx, out.grad)
        _record(tp, (out,), fn)
    return out


def dropout(x: Tensor, rate: float, training: bool, rng: Pcg32 | None = None) -> Tensor:
    """Inverted dropout; identity in eval mode and at rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    keep = rng.uniform_array(x.data.shape) >= rate
    scale = keep / (1.0 - rate)
    out_data = x.data * scale
    tp = _tracking(x)
    out = _out(out_data, tp)
    if tp:
        def fn():
            _accum(x, out.grad * scale)
        _record(tp, (out,), fn)
    return out


@dataclass
class LstmParams:
    """Stacked-gate LSTM cell weights; gate order is input, forget, cell, output.

    w_x: (input_dim, 4*hidden), w_h: (hidden, 4*hidden), b: (4*hidden,).
    """

    w_x: Tensor
    w_h: Tensor
    b: Tensor

    @property
    def hidden(self) -> int:
        return self.w_h.data.shape[0]

    @classmethod
    def create(cls, rng: Pcg32, input_dim: int, hidden: int) -> "LstmParams":
        w_x = uniform_init(rng, (input_dim, 4 * hidden), input_dim)
        w_h = uniform_init(rng, (hidden, 4 * hidden), hidden)
        b = zeros_param((4 * hidden,))
        b.data[hidden:2 * hidden] = 1.0  # forget-gate bias
        return cls(w_x, w_h, b)

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w_x": self.w_x, f"{prefix}.w_h": self.w_h, f"{prefix}.b": self.b}


def lstm_cell(x: Tensor, h_prev: Tensor, c_prev: Tensor, p: LstmParams):
    """One LSTM step on vectors; returns (h, c). Fused analytic backward."""
    hidden = p.hidden
    if x.data.ndim != 1 or h_prev.data.shape != (hidden,) or c_prev.data.shape != (hidden,):
        raise DimensionError(
            f"lstm_cell got x {x.shape}, h {h_prev.shape}, c {c_prev.shape} "
            f"for hidden size {hidden}")
    pre = x.data @ p.w_x.data + h_prev.data @ p.w_h.data + p.b.data
    zi, zf, zg, zo = (pre[:hidden], pre[hidden:2 * hidden],
                      pre[2 * hidden:3 * hidden], pre[3 * hidden:])
    gi = 1.0 / (1.0 + np.exp(-zi))
    gf = 1.0 / (1.0 + np.exp(-zf))
    gg = np.tanh(zg)
    go = 1.0 / (1.0 + np.exp(-zo))
    c_data = gf * c_prev.data + gi * gg
    tc = np.tanh(c_data)
    h_data = go * tc

    tp = _tracking(x, h_prev, c_prev, p.w_x, p.w_h, p.b)
    h = _out(h_data, tp)
    c = _out(c_data, tp)
    if tp:
        xd, hd, cd = x.data, h_prev.data, c_prev.data
        def fn():
            dh = _grad_or_zero(h)
            dc = _grad_or_zero(c) + dh * go * (1.0 - tc * tc)
            d_o = dh * tc * go * (1.0 - go)
            d_f = dc * cd * gf * (1.0 - gf)
            d_i = dc * gg * gi * (1.0 - gi)
            d_g = dc * gi * (1.0 - gg * gg)
            dpre = np.concatenate([d_i, d_f, d_g, d_o])
            _accum(p.w_x, np.outer(xd, dpre))
            _accum(p.w_h, np.outer(hd, dpre))
            _accum(p.b, dpre)
            _accum(x, p.w_x.data @ dpre)
            _accum(h_prev, p.w_h.data @ dpre)
            _accum(c_prev, dc * gf)
        _record(tp, (h, c), fn)
    return h, c
