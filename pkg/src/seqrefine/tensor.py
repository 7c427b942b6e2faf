"""Dense reverse-mode autodiff over float64 numpy arrays.

Only the operations the recommender needs are provided. Every op builds a
node holding its parents and a closure that pushes the output gradient back
into them; :meth:`Tensor.backward` walks the graph in reverse topological
order exactly once per node.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

LEAKY_SLOPE = 0.2


class ShapeError(ValueError):
    pass


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_check(op: str, a: "Tensor", b: "Tensor") -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = "",
                 _parents: tuple = (), _op: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._backward = None
        self.op = _op
        self.name = name

    # -- bookkeeping -----------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op or 'leaf'}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad = self.grad + g

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() without a seed needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order = _topological(self)
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node._accumulate(g)
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg

    # -- operator sugar ----------------------------------------------------
    def __add__(self, other):
        return add(self, _wrap(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division is only supported by constants")
        return mul(self, Tensor(1.0 / np.asarray(other, dtype=np.float64)))

    def __neg__(self):
        return mul(self, Tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def __getitem__(self, index):
        return index_select(self, index)

    @property
    def T(self):
        return transpose(self)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _topological(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def _node(data, parents: tuple, backward, op: str) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs, _parents=parents if needs else (), _op=op)
    if needs:
        out._backward = backward
    return out


# -- elementwise -------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_check("add", a, b)

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(a.data + b.data, (a, b), back, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_check("sub", a, b)

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _node(a.data - b.data, (a, b), back, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_check("mul", a, b)

    def back(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _node(a.data * b.data, (a, b), back, "mul")


def sigmoid(x: Tensor) -> Tensor:
    # split by sign so exp never overflows
    z = x.data
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)

    def back(g):
        return (g * out * (1.0 - out),)

    return _node(out, (x,), back, "sigmoid")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def back(g):
        return (g * (1.0 - out * out),)

    return _node(out, (x,), back, "tanh")


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    scale = np.where(x.data > 0, 1.0, slope)

    def back(g):
        return (g * scale,)

    return _node(x.data * scale, (x,), back, "leaky_relu")


def relu(x: Tensor) -> Tensor:
    """max(0, x); the subgradient at 0 is taken as 0."""
    mask = (x.data > 0).astype(np.float64)

    def back(g):
        return (g * mask,)

    return _node(x.data * mask, (x,), back, "relu")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _node(out, (x,), back, "softmax")


def dropout(x: Tensor, p_drop: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout; identity when not training or ``p_drop == 0``."""
    if not training or p_drop <= 0.0:
        return x
    if p_drop >= 1.0:
        raise ValueError("dropout probability must be < 1")
    keep = 1.0 - p_drop
    mask = (rng.random(x.shape) < keep) / keep
    return mul(x, Tensor(mask))


# -- reductions and reshaping -------------------------------------------------

def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)

    return _node(out, (x,), back, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis=axis, keepdims=keepdims), Tensor(1.0 / n))


def reshape(x: Tensor, shape: tuple) -> Tensor:
    def back(g):
        return (g.reshape(x.shape),)

    return _node(x.data.reshape(shape), (x,), back, "reshape")


def transpose(x: Tensor, axes: tuple | None = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inverse = tuple(np.argsort(axes))

    def back(g):
        return (g.transpose(inverse),)

    return _node(x.data.transpose(axes), (x,), back, "transpose")


def concat(xs: list[Tensor], axis: int = -1) -> Tensor:
    ax = axis % xs[0].ndim
    for t in xs[1:]:
        if t.ndim != xs[0].ndim or any(
            t.shape[i] != xs[0].shape[i] for i in range(t.ndim) if i != ax
        ):
            raise ShapeError(f"concat: incompatible shapes {xs[0].shape} and {t.shape}")
    sizes = [t.shape[ax] for t in xs]
    bounds = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, bounds, axis=ax))

    return _node(np.concatenate([t.data for t in xs], axis=ax), tuple(xs), back, "concat")


def index_select(x: Tensor, index) -> Tensor:
    """Basic/advanced indexing; gradient scatters back with accumulation."""
    out = x.data[index]

    def back(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)

    return _node(out, (x,), back, "index")


def embedding_lookup(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding ids out of range for table of shape {table.shape}")
    return index_select(table, ids)


# -- products ------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 1 or b.ndim < 1 or a.shape[-1] != b.shape[0 if b.ndim == 1 else -2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    if a.ndim == 1 or b.ndim == 1:
        raise ShapeError(f"matmul expects matrices, got shapes {a.shape} and {b.shape}")

    def back(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _node(a.data @ b.data, (a, b), back, "matmul")


def sparse_dense_matmul(s: sp.spmatrix, x: Tensor, s_t: sp.spmatrix | None = None) -> Tensor:
    """``s @ x`` for a constant sparse ``s``; pass ``s_t`` to reuse a cached transpose."""
    if s.shape[1] != x.shape[0]:
        raise ShapeError(f"sparse_dense_matmul: incompatible shapes {s.shape} and {x.shape}")
    st = s.T.tocsr() if s_t is None else s_t

    def back(g):
        return (np.asarray(st @ g),)

    return _node(np.asarray(s @ x.data), (x,), back, "spmm")


def frobenius_sq(params) -> Tensor:
    """Sum of squared entries over a collection of tensors."""
    terms = [sum(mul(p, p)) for p in params]
    total = terms[0]
    for t in terms[1:]:
        total = add(total, t)
    return total


# -- parameter initialisation ---------------------------------------------------

def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, name: str = "") -> Tensor:
    std = np.sqrt(2.0 / (fan_in + fan_out))
    return Tensor(rng.normal(0.0, std, size=(fan_in, fan_out)), requires_grad=True, name=name)


def zeros(shape, name: str = "") -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


def normal(rng: np.random.Generator, shape, std: float, name: str = "") -> Tensor:
    return Tensor(rng.normal(0.0, std, size=shape), requires_grad=True, name=name)


# -- finite-difference check ----------------------------------------------------

def grad_check(f, params: list[Tensor], h: float = 1e-6, n_samples: int | None = None,
               rng: np.random.Generator | None = None, floor: float = 1e-6) -> float:
    """Max relative error between reverse-mode and central-difference gradients.

    ``f`` takes no arguments and returns a scalar Tensor built from ``params``.
    The relative error at a coordinate is ``|a - n| / max(|a|, |n|, floor)``;
    ``floor`` keeps coordinates whose true gradient is ~0 from dividing by noise.
    """
    for p in params:
        p.zero_grad()
    f().backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    coords = [(k, idx) for k, p in enumerate(params) for idx in np.ndindex(p.shape)]
    if n_samples is not None and n_samples < len(coords):
        rng = rng or np.random.default_rng(0)
        pick = rng.choice(len(coords), size=n_samples, replace=False)
        coords = [coords[i] for i in sorted(pick)]

    worst = 0.0
    for k, idx in coords:
        p = params[k]
        orig = p.data[idx]
        p.data[idx] = orig + h
        up = f().item()
        p.data[idx] = orig - h
        down = f().item()
        p.data[idx] = orig
        numeric = (up - down) / (2.0 * h)
        a = analytic[k][idx]
        err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
        worst = max(worst, err)
    return worst
