"""Dense float64 tensors with a reverse-mode tape and an Adam optimizer.

A small engine sized for the PKT graph: elementwise arithmetic, matmul
(2-D plus batched 3-D), last-axis concat, stacking, row gathers, masked
reductions and a masked softmax. Every operation that touches a tensor
requiring gradients records its inputs and a closure that routes the
output gradient back to them; ``Tensor.backward`` walks the recorded
graph once in reverse topological order.

Shapes follow numpy row-major layout. Elementwise binary operations
accept equal shapes, a scalar-shaped operand (``()`` or ``(1,)``), or an
operand whose shape is a trailing suffix of the other (bias-style
broadcast over leading axes); anything fancier must go through the
explicit ``repeat_rows`` / ``repeat_last`` ops so gradients stay obvious.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Adam",
    "no_grad",
    "concat",
    "stack",
    "take_rows",
    "masked_softmax",
]

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (evaluation-only forwards)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def _as_array(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    return arr


def _scalar_shaped(shape: tuple[int, ...]) -> bool:
    return shape == () or shape == (1,)


def _suffix_of(small: tuple[int, ...], big: tuple[int, ...]) -> bool:
    return len(small) < len(big) and big[len(big) - len(small):] == small


def _check_elementwise(a: "Tensor", b: "Tensor", op: str) -> None:
    sa, sb = a.value.shape, b.value.shape
    if sa == sb or _scalar_shaped(sa) or _scalar_shaped(sb):
        return
    if _suffix_of(sa, sb) or _suffix_of(sb, sa):
        return
    raise ValueError(f"{op}: incompatible shapes {sa} and {sb}")


def _sum_to_shape(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Collapse a broadcast gradient back onto the operand's shape."""
    if grad.shape == shape:
        return grad
    if shape == ():
        return np.asarray(grad.sum())
    if shape == (1,):
        return grad.sum().reshape(1)
    return grad.sum(axis=tuple(range(grad.ndim - len(shape))))


def _norm_axis(axis, ndim: int, op: str) -> int:
    if not isinstance(axis, (int, np.integer)):
        raise ValueError(f"{op}: axis must be an int or None, got {axis!r}")
    axis = int(axis)
    if axis < 0:
        axis += ndim
    if not 0 <= axis < ndim:
        raise ValueError(f"{op}: axis {axis} out of range for {ndim}-d input")
    return axis


def _as_mask(mask, shape: tuple[int, ...], op: str) -> np.ndarray:
    m = mask.value if isinstance(mask, Tensor) else mask
    m = np.asarray(m)
    if m.shape != shape:
        raise ValueError(f"{op}: mask shape {m.shape} does not match input shape {shape}")
    return m.astype(bool)


class Tensor:
    """A float64 array plus the tape bookkeeping needed for backward().

    Leaves are constants (``requires_grad=False``) or trainable parameters
    (``requires_grad=True``). Operation outputs keep references only to the
    inputs that require gradients, so constant subexpressions never enter
    the tape.
    """

    __slots__ = ("value", "grad", "requires_grad", "op", "_parents", "_grad_fn")

    def __init__(self, value, requires_grad: bool = False):
        self.value = _as_array(value)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fn: Callable[[np.ndarray], None] | None = None

    # -- bookkeeping -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def item(self) -> float:
        if self.value.size != 1:
            raise ValueError(f"item: tensor has {self.value.size} elements")
        return float(self.value.reshape(-1)[0])

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op!r}{flag})"

    def backward(self) -> None:
        """Backpropagate from a scalar output through the recorded graph.

        Gradient accumulators of every node in the graph are zeroed first,
        then each node is visited exactly once in reverse topological
        order, so repeating the call on the same graph reproduces the same
        gradients bitwise.
        """
        if self.value.size != 1:
            raise ValueError(f"backward: output must be a scalar, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        work: list[tuple[Tensor, bool]] = [(self, False)]
        while work:
            node, expanded = work.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            work.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    work.append((parent, False))
        for node in topo:
            node.grad = np.zeros_like(node.value)
        self.grad = np.ones_like(self.value)
        for node in reversed(topo):
            if node._grad_fn is not None:
                node._grad_fn(node.grad)

    # -- elementwise arithmetic --------------------------------------

    def __add__(self, other) -> "Tensor":
        other = _ensure_tensor(other)
        _check_elementwise(self, other, "add")
        a, b = self, other
        out = a.value + b.value

        def grad_fn(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad += _sum_to_shape(g, a.value.shape)
            if b.requires_grad:
                b.grad += _sum_to_shape(g, b.value.shape)

        return _make_node(out, "add", (a, b), grad_fn)

    def __radd__(self, other) -> "Tensor":
        return self.__add__(other)

    def __sub__(self, other) -> "Tensor":
        other = _ensure_tensor(other)
        _check_elementwise(self, other, "sub")
        a, b = self, other
        out = a.value - b.value

        def grad_fn(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad += _sum_to_shape(g, a.value.shape)
            if b.requires_grad:
                b.grad -= _sum_to_shape(g, b.value.shape)

        return _make_node(out, "sub", (a, b), grad_fn)

    def __rsub__(self, other) -> "Tensor":
        return _ensure_tensor(other).__sub__(self)

    def __mul__(self, other) -> "Tensor":
        other = _ensure_tensor(other)
        _check_elementwise(self, other, "mul")
        a, b = self, other
        out = a.value * b.value

        def grad_fn(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad += _sum_to_shape(g * b.value, a.value.shape)
            if b.requires_grad:
                b.grad += _sum_to_shape(g * a.value, b.value.shape)

        return _make_node(out, "mul", (a, b), grad_fn)

    def __rmul__(self, other) -> "Tensor":
        return self.__mul__(other)

    def __truediv__(self, other) -> "Tensor":
        # scalar divisor only; tensor/tensor division is not part of the graph
        if isinstance(other, Tensor) or isinstance(other, np.ndarray):
            raise ValueError("div: only division by a python scalar is supported")
        denom = float(other)
        if denom == 0.0:
            raise ZeroDivisionError("div: division by zero")
        return self.__mul__(1.0 / denom)

    def __neg__(self) -> "Tensor":
        a = self
        out = -a.value

        def grad_fn(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad -= g

        return _make_node(out, "neg", (a,), grad_fn)

    # -- elementwise nonlinearities ----------------------------------

    def sigmoid(self) -> "Tensor":
        a = self
        v = a.value
        # two-branch form avoids overflow in exp for large |x|
        out = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))),
                       np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))

        def grad_fn(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad += g * out * (1.0 - out)

        return _make_node(out, "sigmoid", (a,), grad_fn)

    def tanh(self) -> "Tensor":
        a = self
        out = np.tanh(a.value)

        def grad_fn(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad += g * (1.0 - out * out)

        return _make_node(out, "tanh", (a,), grad_fn)

    def log(self) -> "Tensor":
        a = self
        if np.any(a.value <= 0):
            raise ValueError("log: input must be strictly positive")
        out = np.log(a.value)

        def grad_fn(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad += g / a.value

        return _make_node(out, "log", (a,), grad_fn)

    def pow(self, exponent: float) -> "Tensor":
        a = self
        exponent = float(exponent)
        if exponent != int(exponent) and np.any(a.value < 0):
            raise ValueError("pow: fractional exponent on negative base")
        out = np.power(a.value, exponent)

        def grad_fn(g: np.ndarray) -> None:
            if a.requires_grad:
                if exponent == 0.0:
                    return
                a.grad += g * exponent * np.power(a.value, exponent - 1.0)

        return _make_node(out, "pow", (a,), grad_fn)

    def clip(self, lo: float, hi: float) -> "Tensor":
        """Clamp values to [lo, hi]; gradient passes through unclipped entries."""
        if not lo < hi:
            raise ValueError(f"clip: empty interval [{lo}, {hi}]")
        a = self
        out = np.clip(a.value, lo, hi)
        inside = (a.value >= lo) & (a.value <= hi)

        def grad_fn(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad += g * inside

        return _make_node(out, "clip", (a,), grad_fn)

    # -- linear algebra ----------------------------------------------

    def matmul(self, other) -> "Tensor":
        a, b = self, _ensure_tensor(other)
        av, bv = a.value, b.value
        case = (av.ndim, bv.ndim)
        if case == (1, 2):
            if av.shape[0] != bv.shape[0]:
                raise ValueError(f"matmul: inner dimensions differ, {av.shape} @ {bv.shape}")
        elif case == (2, 1):
            if av.shape[1] != bv.shape[0]:
                raise ValueError(f"matmul: inner dimensions differ, {av.shape} @ {bv.shape}")
        elif case == (2, 2) or case == (3, 2):
            if av.shape[-1] != bv.shape[0]:
                raise ValueError(f"matmul: inner dimensions differ, {av.shape} @ {bv.shape}")
        elif case == (3, 3):
            if av.shape[0] != bv.shape[0] or av.shape[-1] != bv.shape[1]:
                raise ValueError(f"matmul: incompatible batched shapes {av.shape} @ {bv.shape}")
        else:
            raise ValueError(f"matmul: unsupported operand ranks {av.ndim} and {bv.ndim}")
        out = av @ bv

        def grad_fn(g: np.ndarray) -> None:
            if case == (1, 2):
                if a.requires_grad:
                    a.grad += bv @ g
                if b.requires_grad:
                    b.grad += np.outer(av, g)
            elif case == (2, 1):
                if a.requires_grad:
                    a.grad += np.outer(g, bv)
                if b.requires_grad:
                    b.grad += av.T @ g
            elif case == (2, 2):
                if a.requires_grad:
                    a.grad += g @ bv.T
                if b.requires_grad:
                    b.grad += av.T @ g
            elif case == (3, 3):
                if a.requires_grad:
                    a.grad += g @ bv.swapaxes(-1, -2)
                if b.requires_grad:
                    b.grad += av.swapaxes(-1, -2) @ g
            else:  # (3, 2)
                if a.requires_grad:
                    a.grad += g @ bv.T
                if b.requires_grad:
                    b.grad += (av.swapaxes(-1, -2) @ g).sum(axis=0)

        return _make_node(out, "matmul", (a, b), grad_fn)

    def __matmul__(self, other) -> "Tensor":
        return self.matmul(other)

    def transpose(self) -> "Tensor":
        if self.value.ndim != 2:
            raise ValueError(f"transpose: expected a 2-d tensor, got shape {self.shape}")
        a = self
        out = a.value.T.copy()

        def grad_fn(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad += g.T

        return _make_node(out, "transpose", (a,), grad_fn)

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def dot(self, other) -> "Tensor":
        a, b = self, _ensure_tensor(other)
        if a.value.ndim != 1 or b.value.ndim != 1:
            raise ValueError(f"dot: expected two 1-d tensors, got {a.shape} and {b.shape}")
        if a.shape != b.shape:
            raise ValueError(f"dot: length mismatch {a.shape} vs {b.shape}")
        out = np.asarray(a.value @ b.value)

        def grad_fn(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad += g * b.value
            if b.requires_grad:
                b.grad += g * a.value

        return _make_node(out, "dot", (a, b), grad_fn)

    # -- shape ops ----------------------------------------------------

    def reshape(self, shape) -> "Tensor":
        a = self
        out = a.value.reshape(shape).copy()

        def grad_fn(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad += g.reshape(a.value.shape)

        return _make_node(out, "reshape", (a,), grad_fn)

    def repeat_rows(self, n: int) -> "Tensor":
        """(..., T) -> (..., n, T): stack n copies of the last-axis vector."""
        if n < 1:
            raise ValueError(f"repeat_rows: n must be >= 1, got {n}")
        a = self
        out = np.repeat(a.value[..., None, :], n, axis=-2)

        def grad_fn(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad += g.sum(axis=-2)

        return _make_node(out, "repeat_rows", (a,), grad_fn)

    def repeat_last(self, n: int) -> "Tensor":
        """(...,) -> (..., n): repeat each element along a new last axis."""
        if n < 1:
            raise ValueError(f"repeat_last: n must be >= 1, got {n}")
        a = self
        out = np.repeat(a.value[..., None], n, axis=-1)

        def grad_fn(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad += g.sum(axis=-1)

        return _make_node(out, "repeat_last", (a,), grad_fn)

    # -- reductions ----------------------------------------------------

    def sum(self, axis=None, mask=None) -> "Tensor":
        a = self
        v = a.value
        if mask is None:
            out = v.sum(axis=axis) if axis is None else v.sum(axis=_norm_axis(axis, v.ndim, "sum"))

            if axis is None:
                def grad_fn(g: np.ndarray) -> None:
                    if a.requires_grad:
                        a.grad += g
            else:
                ax = _norm_axis(axis, v.ndim, "sum")

                def grad_fn(g: np.ndarray) -> None:
                    if a.requires_grad:
                        a.grad += np.expand_dims(g, ax)
            return _make_node(out, "sum", (a,), grad_fn)

        m = _as_mask(mask, v.shape, "sum")
        masked = np.where(m, v, 0.0)
        if axis is None:
            out = masked.sum()

            def grad_fn(g: np.ndarray) -> None:
                if a.requires_grad:
                    a.grad += g * m
        else:
            ax = _norm_axis(axis, v.ndim, "sum")
            out = masked.sum(axis=ax)

            def grad_fn(g: np.ndarray) -> None:
                if a.requires_grad:
                    a.grad += np.expand_dims(g, ax) * m

        return _make_node(out, "sum", (a,), grad_fn)

    def mean(self, axis=None, mask=None) -> "Tensor":
        a = self
        v = a.value
        if mask is None:
            if axis is None:
                if v.size == 0:
                    raise ValueError("mean: empty tensor")
                n = v.size
                out = v.mean()

                def grad_fn(g: np.ndarray) -> None:
                    if a.requires_grad:
                        a.grad += g / n
            else:
                ax = _norm_axis(axis, v.ndim, "mean")
                n = v.shape[ax]
                if n == 0:
                    raise ValueError("mean: empty axis")
                out = v.mean(axis=ax)

                def grad_fn(g: np.ndarray) -> None:
                    if a.requires_grad:
                        a.grad += np.expand_dims(g, ax) / n
            return _make_node(out, "mean", (a,), grad_fn)

        m = _as_mask(mask, v.shape, "mean")
        masked = np.where(m, v, 0.0)
        if axis is None:
            count = m.sum()
            if count == 0:
                raise ValueError("mean: no unmasked elements")
            out = masked.sum() / count

            def grad_fn(g: np.ndarray) -> None:
                if a.requires_grad:
                    a.grad += (g / count) * m
        else:
            ax = _norm_axis(axis, v.ndim, "mean")
            count = m.sum(axis=ax)
            if np.any(count == 0):
                raise ValueError("mean: an axis slice has no unmasked elements")
            out = masked.sum(axis=ax) / count

            def grad_fn(g: np.ndarray) -> None:
                if a.requires_grad:
                    a.grad += np.expand_dims(g / count, ax) * m

        return _make_node(out, "mean", (a,), grad_fn)

    def max(self, axis=None, mask=None) -> "Tensor":
        """Max reduction; gradient flows only to the argmax (first index on ties)."""
        a = self
        v = a.value
        if mask is not None:
            m = _as_mask(mask, v.shape, "max")
            work = np.where(m, v, -np.inf)
            if axis is None:
                if not m.any():
                    raise ValueError("max: no unmasked elements")
            else:
                if np.any(m.sum(axis=_norm_axis(axis, v.ndim, "max")) == 0):
                    raise ValueError("max: an axis slice has no unmasked elements")
        else:
            if v.size == 0:
                raise ValueError("max: empty tensor")
            work = v

        if axis is None:
            flat = int(work.argmax())
            out = np.asarray(work.reshape(-1)[flat])
            pos = np.unravel_index(flat, v.shape)

            def grad_fn(g: np.ndarray) -> None:
                if a.requires_grad:
                    a.grad[pos] += g
        else:
            ax = _norm_axis(axis, v.ndim, "max")
            am = np.expand_dims(work.argmax(axis=ax), ax)
            out = np.take_along_axis(work, am, axis=ax).squeeze(axis=ax)

            def grad_fn(g: np.ndarray) -> None:
                if a.requires_grad:
                    buf = np.zeros_like(v)
                    np.put_along_axis(buf, am, np.expand_dims(g, ax), axis=ax)
                    a.grad += buf

        return _make_node(out, "max", (a,), grad_fn)


def _ensure_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _make_node(value: np.ndarray, op: str, parents: tuple[Tensor, ...],
               grad_fn: Callable[[np.ndarray], None]) -> Tensor:
    node = Tensor(value)
    if not _grad_enabled:
        return node
    tracked = tuple(p for p in parents if p.requires_grad)
    if not tracked:
        return node
    node.requires_grad = True
    node.op = op
    node._parents = tracked
    node._grad_fn = grad_fn
    return node


# -- multi-input ops ----------------------------------------------------


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Concatenate along the last axis; other axes must agree exactly."""
    parts = [_ensure_tensor(t) for t in tensors]
    if not parts:
        raise ValueError("concat: need at least one tensor")
    ndim = parts[0].value.ndim
    if axis not in (-1, ndim - 1):
        raise ValueError("concat: only last-axis concatenation is supported")
    lead = parts[0].value.shape[:-1]
    for p in parts:
        if p.value.ndim != ndim or p.value.shape[:-1] != lead:
            raise ValueError(
                f"concat: shapes {[q.shape for q in parts]} differ outside the last axis")
    out = np.concatenate([p.value for p in parts], axis=-1)
    sizes = [p.value.shape[-1] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def grad_fn(g: np.ndarray) -> None:
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                p.grad += g[..., lo:hi]

    return _make_node(out, "concat", tuple(parts), grad_fn)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Stack equally shaped tensors along a new axis."""
    parts = [_ensure_tensor(t) for t in tensors]
    if not parts:
        raise ValueError("stack: need at least one tensor")
    shape = parts[0].value.shape
    for p in parts:
        if p.value.shape != shape:
            raise ValueError(f"stack: shapes {[q.shape for q in parts]} are not all equal")
    if not -(len(shape) + 1) <= axis <= len(shape):
        raise ValueError(f"stack: axis {axis} out of range")
    out = np.stack([p.value for p in parts], axis=axis)

    def grad_fn(g: np.ndarray) -> None:
        for i, p in enumerate(parts):
            if p.requires_grad:
                p.grad += np.take(g, i, axis=axis)

    return _make_node(out, "stack", tuple(parts), grad_fn)


def take_rows(table: Tensor, indices) -> Tensor:
    """Gather rows of a 2-d table by integer index; scatter-adds on backward."""
    table = _ensure_tensor(table)
    if table.value.ndim != 2:
        raise ValueError(f"take_rows: table must be 2-d, got shape {table.shape}")
    idx = np.asarray(indices)
    if not np.issubdtype(idx.dtype, np.integer):
        raise ValueError(f"take_rows: indices must be integers, got dtype {idx.dtype}")
    n = table.value.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError(
            f"take_rows: index out of range [0, {n}), got min {idx.min()} max {idx.max()}")
    out = table.value[idx]

    def grad_fn(g: np.ndarray) -> None:
        if table.requires_grad:
            np.add.at(table.grad, idx, g)

    return _make_node(out, "take_rows", (table,), grad_fn)


def masked_softmax(logits: Tensor, mask) -> Tensor:
    """Softmax over the last axis restricted to unmasked positions.

    Masked positions output exactly 0 and receive exactly zero gradient.
    The max of each row's unmasked entries is subtracted before
    exponentiation for stability.
    """
    logits = _ensure_tensor(logits)
    m = _as_mask(mask, logits.value.shape, "masked_softmax")
    if np.any(m.sum(axis=-1) == 0):
        raise ValueError("masked_softmax: a row has no unmasked positions")
    v = logits.value
    row_max = np.max(np.where(m, v, -np.inf), axis=-1, keepdims=True)
    exps = np.where(m, np.exp(np.where(m, v - row_max, 0.0)), 0.0)
    out = exps / exps.sum(axis=-1, keepdims=True)

    def grad_fn(g: np.ndarray) -> None:
        if logits.requires_grad:
            inner = (g * out).sum(axis=-1, keepdims=True)
            logits.grad += out * (g - inner)

    return _make_node(out, "masked_softmax", (logits,), grad_fn)


# -- optimizer ----------------------------------------------------------


class Adam:
    """Adam with bias correction.

    Keeps one pair of first/second moment buffers per parameter plus the
    shared step counter; ``step`` applies
    ``p -= lr * m_hat / (sqrt(v_hat) + eps)``.
    """

    def __init__(self, params: Iterable[Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        if not self.params:
            raise ValueError("Adam: no parameters")
        for p in self.params:
            if not isinstance(p, Tensor) or not p.requires_grad:
                raise ValueError("Adam: every parameter must be a Tensor with requires_grad=True")
        if not 0 < lr:
            raise ValueError(f"Adam: lr must be positive, got {lr}")
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ValueError(f"Adam: betas must lie in [0, 1), got {beta1}, {beta2}")
        if eps <= 0:
            raise ValueError(f"Adam: eps must be positive, got {eps}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = np.zeros_like(p.value)

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                raise ValueError("Adam.step: parameter has no gradient; run backward first")
            if p.grad.shape != p.value.shape:
                raise ValueError(
                    f"Adam.step: gradient shape {p.grad.shape} does not match "
                    f"parameter shape {p.value.shape}")
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / bc1
            v_hat = v / bc2
            p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
