"""Reverse-mode automatic differentiation over dense 2-D float64 arrays.

Graphs are built define-by-run: every operation on a tensor that requires a
gradient (directly or through its inputs) records its parents and a backward
rule.  ``backward`` and ``grad`` linearise the graph into a :class:`Tape`
and sweep it once in reverse.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

BackwardRule = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class ShapeError(ValueError):
    pass


_recording = True


@contextlib.contextmanager
def no_grad():
    """Evaluate without recording anything on a tape."""
    global _recording
    prev, _recording = _recording, False
    try:
        yield
    finally:
        _recording = prev


class Tensor:
    """A rows x cols float64 array with an optional accumulated gradient."""

    __array_priority__ = 100  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"Tensor must be 2-D, got array of shape {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardRule | None = None
        self.op = "leaf"

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: tuple[Tensor, ...], rule: BackwardRule, op: str) -> Tensor:
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.op = op
        if _recording and any(p.on_tape for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = rule
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    @property
    def on_tape(self) -> bool:
        return self.requires_grad

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data.tolist()}{flag})"

    def __len__(self) -> int:
        return self.rows

    # arithmetic sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return hadamard(self, other)

    def __rmul__(self, other):
        return hadamard(as_tensor(other), self)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, 1.0 / other)
        return hadamard(self, power(as_tensor(other), -1))

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return negate(self)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return take(self, idx)

    def sum(self) -> Tensor:
        return reduce("sum", self)

    def mean(self) -> Tensor:
        return reduce("mean", self)

    def exp(self) -> Tensor:
        return exp(self)

    def relu(self) -> Tensor:
        return relu(self)

    def backward(self) -> None:
        backward(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# ---------------------------------------------------------------------------
# binary ops

def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _check_broadcast(kind: str, a: Tensor, b: Tensor) -> None:
    for da, db in zip(a.shape, b.shape):
        if da != db and da != 1 and db != 1:
            raise ShapeError(f"{kind}: cannot combine shapes {a.shape} and {b.shape}")


def tensor_binary(kind: str, a, b) -> Tensor:
    """Apply ``kind`` in {add, sub, hadamard, matmul} to two tensors.

    Elementwise kinds accept identical shapes or a broadcast 1-row, 1-column
    or 1x1 operand.
    """
    a, b = as_tensor(a), as_tensor(b)
    if kind == "matmul":
        if a.cols != b.rows:
            raise ShapeError(f"matmul: cannot combine shapes {a.shape} and {b.shape}")
        A, B = a.data, b.data
        return Tensor._from_op(A @ B, (a, b), lambda g: (g @ B.T, A.T @ g), "matmul")
    _check_broadcast(kind, a, b)
    sa, sb = a.shape, b.shape
    if kind == "add":
        return Tensor._from_op(
            a.data + b.data, (a, b),
            lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")
    if kind == "sub":
        return Tensor._from_op(
            a.data - b.data, (a, b),
            lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub")
    if kind == "hadamard":
        A, B = a.data, b.data
        return Tensor._from_op(
            A * B, (a, b),
            lambda g: (_unbroadcast(g * B, sa), _unbroadcast(g * A, sb)), "hadamard")
    raise ValueError(f"unknown binary op {kind!r}")


def add(a, b) -> Tensor:
    return tensor_binary("add", a, b)


def sub(a, b) -> Tensor:
    return tensor_binary("sub", a, b)


def hadamard(a, b) -> Tensor:
    return tensor_binary("hadamard", a, b)


def matmul(a, b) -> Tensor:
    return tensor_binary("matmul", a, b)


# ---------------------------------------------------------------------------
# unary ops

def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return Tensor._from_op(out, (a,), lambda g: (g * out,), "exp")


def scale(a: Tensor, k: float) -> Tensor:
    k = float(k)
    return Tensor._from_op(a.data * k, (a,), lambda g: (g * k,), "scale")


def negate(a: Tensor) -> Tensor:
    return Tensor._from_op(-a.data, (a,), lambda g: (-g,), "negate")


def power(a: Tensor, p: float) -> Tensor:
    p = float(p)
    x = a.data
    if not p.is_integer() and np.any(x < 0):
        raise ValueError(f"power: negative base with fractional exponent {p}")
    out = x ** p
    return Tensor._from_op(out, (a,), lambda g: (g * p * x ** (p - 1),), "power")


def log(a: Tensor) -> Tensor:
    x = a.data
    if np.any(x <= 0):
        raise ValueError("log: non-positive input")
    return Tensor._from_op(np.log(x), (a,), lambda g: (g / x,), "log")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return Tensor._from_op(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def softplus(a: Tensor) -> Tensor:
    x = a.data
    out = np.logaddexp(0.0, x)
    sig = 0.5 * (1.0 + np.tanh(0.5 * x))
    return Tensor._from_op(out, (a,), lambda g: (g * sig,), "softplus")


def tensor_unary(kind: str, a: Tensor, arg: float | None = None) -> Tensor:
    if kind == "exp":
        return exp(a)
    if kind == "negate":
        return negate(a)
    if kind == "scale":
        return scale(a, arg)
    if kind == "power":
        return power(a, arg)
    raise ValueError(f"unknown unary op {kind!r}")


# ---------------------------------------------------------------------------
# reductions and indexing

def reduce(kind: str, a: Tensor) -> Tensor:
    """``sum``/``mean`` give 1x1, ``sum_rows`` rows x 1, ``sum_cols``/``mean_cols`` 1 x cols."""
    shape = a.shape
    if kind == "sum":
        return Tensor._from_op(a.data.sum().reshape(1, 1), (a,),
                               lambda g: (np.broadcast_to(g, shape),), "sum")
    if kind == "mean":
        n = a.data.size
        return Tensor._from_op(a.data.mean().reshape(1, 1), (a,),
                               lambda g: (np.broadcast_to(g / n, shape),), "mean")
    if kind == "sum_rows":
        return Tensor._from_op(a.data.sum(axis=1, keepdims=True), (a,),
                               lambda g: (np.broadcast_to(g, shape),), "sum_rows")
    if kind == "sum_cols":
        return Tensor._from_op(a.data.sum(axis=0, keepdims=True), (a,),
                               lambda g: (np.broadcast_to(g, shape),), "sum_cols")
    if kind == "mean_cols":
        n = shape[0]
        return Tensor._from_op(a.data.mean(axis=0, keepdims=True), (a,),
                               lambda g: (np.broadcast_to(g / n, shape),), "mean_cols")
    raise ValueError(f"unknown reduction {kind!r}")


def take(a: Tensor, idx) -> Tensor:
    """Index with numpy semantics; the result is forced back to 2-D."""
    shape = a.shape
    picked = a.data[idx]
    out = np.array(picked, dtype=np.float64, ndmin=2) if np.ndim(picked) < 2 else picked.copy()
    if out.ndim != 2:
        raise ShapeError(f"indexing {shape} with {idx!r} does not give a 2-D result")
    view_shape = np.shape(picked)

    def rule(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g.reshape(view_shape))
        return (full,)

    return Tensor._from_op(out, (a,), rule, "take")


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    widths = [p.cols for p in parts]
    bounds = np.cumsum([0] + widths)

    def rule(g):
        return tuple(g[:, lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]))

    return Tensor._from_op(np.concatenate([p.data for p in parts], axis=1), tuple(parts), rule, "concat")


# ---------------------------------------------------------------------------
# norms

def p_norm_rows(a: Tensor, p: int) -> Tensor:
    """Per-row p-norm, shape rows x 1.  The gradient at a zero row is zero."""
    if p not in (2, 4):
        raise ValueError(f"p_norm_rows supports p in {{2, 4}}, got {p}")
    x = a.data
    norm = (np.abs(x) ** p).sum(axis=1, keepdims=True) ** (1.0 / p)

    def rule(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(norm > 0, x ** (p - 1) / norm ** (p - 1), 0.0)
        return (g * d,)

    return Tensor._from_op(norm, (a,), rule, f"pnorm{p}")


def pairwise_p_distance(x: Tensor, c: Tensor, p: int) -> Tensor:
    """Distances ``||x_b - c_u||_p`` between every row of x and every row of c.

    Returns a batch x units tensor.  Differentiable in both arguments; the
    gradient is zero where a distance is exactly zero.
    """
    if p not in (2, 4):
        raise ValueError(f"pairwise_p_distance supports p in {{2, 4}}, got {p}")
    if x.cols != c.cols:
        raise ShapeError(f"pairwise_p_distance: cannot combine shapes {x.shape} and {c.shape}")
    diff = x.data[:, None, :] - c.data[None, :, :]
    if p == 2:
        s = np.einsum("buk,buk->bu", diff, diff)
        dist = np.sqrt(s)
    else:
        sq = diff * diff
        s = np.einsum("buk,buk->bu", sq, sq)
        dist = np.sqrt(np.sqrt(s))

    def rule(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(dist > 0, g / dist ** (p - 1), 0.0)
        d_pow = diff if p == 2 else diff * diff * diff
        gx = np.einsum("bu,buk->bk", w, d_pow)
        gc = -np.einsum("bu,buk->uk", w, d_pow)
        return gx, gc

    return Tensor._from_op(dist, (x, c), rule, f"pdist{p}")


# ---------------------------------------------------------------------------
# tape

class Tape:
    """Topologically ordered record of the nodes that feed one output."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def record(cls, output: Tensor) -> Tape:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        return cls(order)

    def __len__(self) -> int:
        return len(self.nodes)

    def sweep(self, seed: np.ndarray) -> dict[int, np.ndarray]:
        """Propagate ``seed`` from the last node back; returns adjoints keyed by id."""
        adj: dict[int, np.ndarray] = {id(self.nodes[-1]): seed}
        for node in reversed(self.nodes):
            g = adj.get(id(node))
            if g is None or node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.on_tape:
                    continue
                key = id(parent)
                if key in adj:
                    adj[key] = adj[key] + pg
                else:
                    adj[key] = np.array(pg, dtype=np.float64)
        return adj


def _check_scalar(loss: Tensor) -> None:
    if loss.shape != (1, 1):
        raise ShapeError(f"backward needs a 1x1 loss, got {loss.shape}")


def backward(loss: Tensor, tape: Tape | None = None) -> Tape:
    """Accumulate dloss/dT into ``T.grad`` for every tensor on the tape."""
    _check_scalar(loss)
    if not loss.on_tape:
        raise ValueError("backward: loss is not attached to any tape")
    tape = tape or Tape.record(loss)
    adj = tape.sweep(np.ones((1, 1)))
    for node in tape.nodes:
        g = adj.get(id(node))
        if g is None:
            continue
        node.grad = g.copy() if node.grad is None else node.grad + g
    return tape


def grad(output: Tensor, inputs: Iterable[Tensor]) -> list[np.ndarray]:
    """Gradients of a scalar ``output`` w.r.t. ``inputs`` without touching any ``.grad``."""
    _check_scalar(output)
    inputs = list(inputs)
    if not output.on_tape:
        return [np.zeros_like(t.data) for t in inputs]
    adj = Tape.record(output).sweep(np.ones((1, 1)))
    return [adj.get(id(t), np.zeros_like(t.data)) for t in inputs]


def zero_grad(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.grad = None


def finite_diff_check(f: Callable[[Tensor], Tensor], x, h: float = 1e-6) -> float:
    """Max over coordinates of |analytic - central difference| / max(1, |analytic|)."""
    x0 = np.array(as_tensor(x).data, dtype=np.float64)
    probe = Tensor(x0.copy(), requires_grad=True)
    (analytic,) = grad(f(probe), [probe])
    numeric = np.zeros_like(x0)
    for idx in np.ndindex(*x0.shape):
        xp = x0.copy()
        xp[idx] += h
        xm = x0.copy()
        xm[idx] -= h
        numeric[idx] = (f(Tensor(xp)).item() - f(Tensor(xm)).item()) / (2 * h)
    err = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
    return float(err.max()) if err.size else 0.0
