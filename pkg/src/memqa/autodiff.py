"""Dense real tensors with reverse-mode automatic differentiation.

The graph is recorded eagerly: any operation touching a tracked tensor
attaches a backprop closure to its result.  `backward()` on a scalar
walks the graph once in reverse topological order, accumulates (+=)
into leaf gradients, and then invalidates the visited interior nodes,
so each recorded graph can be differentiated exactly once.

Every forward operation checks its output for NaN/Inf; overflow raises
instead of propagating silently.
"""

import numpy as np

from .errors import NonFiniteError, ShapeError, TapeError

DEFAULT_DTYPE = np.float32


class Tensor:
    """N-d real array, optionally carrying a gradient of the same shape."""

    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backprop", "_spent")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        # leaves keep a zero gradient so "no contribution" reads as 0
        self.grad = np.zeros_like(arr) if self.requires_grad else None
        self.op = "leaf"
        self._parents = ()
        self._backprop = None
        self._spent = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- scalar/elementwise sugar ---------------------------------------
    def __add__(self, other):
        return add(self, _lift(other, self.dtype))

    def __radd__(self, other):
        return add(_lift(other, self.dtype), self)

    def __sub__(self, other):
        return add(self, mul(_lift(other, self.dtype), _lift(-1.0, self.dtype)))

    def __rsub__(self, other):
        return add(_lift(other, self.dtype), mul(self, _lift(-1.0, self.dtype)))

    def __mul__(self, other):
        return mul(self, _lift(other, self.dtype))

    def __rmul__(self, other):
        return mul(_lift(other, self.dtype), self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division is only supported by plain scalars")
        return mul(self, _lift(1.0 / float(other), self.dtype))

    def __neg__(self):
        return mul(self, _lift(-1.0, self.dtype))

    def __matmul__(self, other):
        return matmul(self, other)

    # -- backward pass ---------------------------------------------------
    def backward(self):
        """Populate gradients of every tracked tensor this scalar depends on."""
        if self.data.size != 1:
            raise TapeError(f"backward requires a scalar root, got shape {self.data.shape}")
        if not self.requires_grad:
            raise TapeError("backward on a tensor that does not require grad")
        if self._spent:
            raise TapeError("tape already consumed; rebuild the graph before backward")
        if not self._parents:
            raise TapeError("backward on a leaf: the tape is empty")

        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, ready = stack.pop()
            if ready:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            if node._spent:
                raise TapeError("tape already consumed; rebuild the graph before backward")
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backprop is not None:
                node._backprop()
                node._spent = True
                node._backprop = None
                node._parents = ()


def backward(root):
    """Module-level alias for Tensor.backward."""
    root.backward()


def _lift(value, dtype):
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def _accumulate(t, g):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g.astype(t.data.dtype, copy=False)


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to `shape`."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def custom_op(data, op, inputs, backward_fn):
    """Create a tensor from `data`, wiring `backward_fn` into the tape.

    backward_fn(out_grad) must return one gradient array (or None) per
    entry of `inputs`.  The result is tracked iff any input is.
    """
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{op}: non-finite values in output")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.op = op
    out.grad = None
    out._spent = False
    tracked = tuple(t for t in inputs if isinstance(t, Tensor) and t.requires_grad)
    out.requires_grad = bool(tracked)
    if tracked:
        out._parents = tracked

        def _bp():
            grads = backward_fn(out.grad)
            for t, g in zip(inputs, grads):
                if isinstance(t, Tensor) and t.requires_grad and g is not None:
                    _accumulate(t, g)

        out._backprop = _bp
    else:
        out._parents = ()
        out._backprop = None
    return out


# -- primitives ----------------------------------------------------------

def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.data.shape} @ {b.data.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = a.data @ b.data

    def _grads(g):
        return g @ b.data.T, a.data.T @ g

    return custom_op(out, "matmul", (a, b), _grads)


def add(a, b):
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            out = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.data.shape} and {b.data.shape} do not broadcast")

    def _grads(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return custom_op(out, "add", (a, b), _grads)


def mul(a, b):
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            out = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: shapes {a.data.shape} and {b.data.shape} do not broadcast")

    def _grads(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return custom_op(out, "mul", (a, b), _grads)


def concat(tensors, axis=0):
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat: empty input list")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def _grads(g):
        return tuple(np.split(g, offsets, axis=axis))

    return custom_op(out, "concat", tuple(tensors), _grads)


def transpose(a, axes=None):
    out = np.transpose(a.data, axes)
    inv = None if axes is None else np.argsort(axes)

    def _grads(g):
        return (np.transpose(g, inv),)

    return custom_op(out, "transpose", (a,), _grads)


def reshape(a, shape):
    out = a.data.reshape(shape)

    def _grads(g):
        return (g.reshape(a.data.shape),)

    return custom_op(out, "reshape", (a,), _grads)


def tanh(a):
    out = np.tanh(a.data)

    def _grads(g):
        return (g * (1.0 - out * out),)

    return custom_op(out, "tanh", (a,), _grads)


def sigmoid(a):
    z = a.data
    out = np.empty_like(z)
    pos = z >= 0
    with np.errstate(over="ignore"):
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)

    def _grads(g):
        return (g * out * (1.0 - out),)

    return custom_op(out, "sigmoid", (a,), _grads)


def relu(a):
    out = np.maximum(a.data, 0.0)

    def _grads(g):
        return (g * (a.data > 0),)

    return custom_op(out, "relu", (a,), _grads)


def softmax(a, axis=-1):
    _check_axis(a, axis, "softmax")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def _grads(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return custom_op(out, "softmax", (a,), _grads)


def max_reduce(a, axis):
    """Max along `axis`; returns (values, argmax).  Ties pick the lowest index."""
    _check_axis(a, axis, "max_reduce")
    idx = np.argmax(a.data, axis=axis)
    out = np.take_along_axis(a.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def _grads(g):
        buf = np.zeros_like(a.data)
        np.put_along_axis(buf, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis)
        return (buf,)

    return custom_op(out, "max_reduce", (a,), _grads), idx


def sum_reduce(a, axis=None):
    out = a.data.sum(axis=axis)

    def _grads(g):
        if axis is None:
            return (np.full_like(a.data, g),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy(),)

    return custom_op(np.asarray(out), "sum_reduce", (a,), _grads)


def mean_reduce(a, axis=None):
    n = a.data.size if axis is None else a.data.shape[axis]
    out = a.data.mean(axis=axis)

    def _grads(g):
        if axis is None:
            return (np.full_like(a.data, g / n),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.data.shape) / n,)

    return custom_op(np.asarray(out), "mean_reduce", (a,), _grads)


def embedding_lookup(table, indices):
    """Gather rows of a 2-d tensor; gradients scatter-add back."""
    if table.data.ndim != 2:
        raise ShapeError(f"embedding_lookup: table must be 2-d, got {table.data.shape}")
    idx = np.asarray(indices)
    if not np.issubdtype(idx.dtype, np.integer):
        raise ShapeError("embedding_lookup: indices must be integers")
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise ShapeError(f"embedding_lookup: index out of range for table {table.data.shape}")
    out = table.data[idx]

    def _grads(g):
        buf = np.zeros_like(table.data)
        np.add.at(buf, idx, g)
        return (buf,)

    return custom_op(out, "embedding_lookup", (table,), _grads)


def masked_fill(a, mask, value):
    """Replace entries where `mask` is True by `value` (mask broadcastable)."""
    m = np.asarray(mask)
    if m.dtype != np.bool_:
        raise ShapeError("masked_fill: mask must be boolean")
    if np.broadcast_shapes(a.data.shape, m.shape) != a.data.shape:
        raise ShapeError(f"masked_fill: mask {m.shape} does not broadcast to {a.data.shape}")
    out = np.where(m, np.asarray(value, dtype=a.data.dtype), a.data)
    keep = np.broadcast_to(~m, a.data.shape)

    def _grads(g):
        return (g * keep,)

    return custom_op(out, "masked_fill", (a,), _grads)


def _check_axis(a, axis, op):
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ShapeError(f"{op}: axis {axis} invalid for shape {a.data.shape}")


_PRIMITIVES = {
    "matmul": matmul,
    "add": add,
    "mul": mul,
    "concat": concat,
    "transpose": transpose,
    "reshape": reshape,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "relu": relu,
    "softmax": softmax,
    "max_reduce": max_reduce,
    "mean_reduce": mean_reduce,
    "sum_reduce": sum_reduce,
    "embedding_lookup": embedding_lookup,
    "masked_fill": masked_fill,
}


def apply_primitive(kind, inputs, **params):
    """Dispatch a primitive by name.  `concat` takes the list as-is."""
    try:
        fn = _PRIMITIVES[kind]
    except KeyError:
        raise ShapeError(f"unknown primitive {kind!r}")
    if kind == "concat":
        return fn(inputs, **params)
    return fn(*inputs, **params)
