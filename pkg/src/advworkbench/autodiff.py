"""Dense float64 tensors with tape-based reverse-mode differentiation.

Usage::

    x = Tensor(np.array([1.0, 2.0]))
    with Tape() as tape:
        tape.watch(x)
        y = ad.sum(ad.square(x))
    grads = backward(tape, y)
    grads[x]  # -> array([2., 4.])

Only the primitives needed by the small CNNs in this package are provided.
Shapes are explicit: elementwise binary ops require equal shapes, and the
only broadcasting op is ``add_bias``.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Tensor",
    "Tape",
    "Gradients",
    "ShapeError",
    "backward",
    "finite_difference_check",
    "matmul",
    "conv2d",
    "add_bias",
    "relu",
    "tanh",
    "softmax",
    "add",
    "sub",
    "mul",
    "scale",
    "add_scalar",
    "square",
    "log",
    "clip",
    "sum",
    "mean",
    "reshape",
    "maxpool2x2",
]

class ShapeError(ValueError):
    pass


class Tensor:
    """An immutable n-dimensional float64 array that can be recorded on a tape."""

    __slots__ = ("data", "name", "__weakref__")

    def __init__(self, data, name=None):
        arr = np.array(data, dtype=np.float64)
        arr.setflags(write=False)
        self.data = arr
        self.name = name

    @classmethod
    def _wrap(cls, arr):
        # arr is freshly allocated by an op and owned by the new tensor
        t = cls.__new__(cls)
        arr = np.asarray(arr, dtype=np.float64)
        arr.setflags(write=False)
        t.data = arr
        t.name = None
        return t

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data.copy()

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class _Record:
    __slots__ = ("out", "inputs", "vjp", "op")

    def __init__(self, op, out, inputs, vjp):
        self.op = op
        self.out = out
        self.inputs = inputs
        self.vjp = vjp


_active = []


class Tape:
    """Ordered record of primitive operations applied during a forward pass.

    Operations are recorded when at least one operand is watched or was
    itself produced on this tape. A tape supports a single backward pass.
    """

    def __init__(self):
        self.records = []
        self._tracked = {}
        self.consumed = False

    def __enter__(self):
        if self.consumed:
            raise RuntimeError("tape has already been consumed by a backward pass")
        _active.append(self)
        return self

    def __exit__(self, *exc):
        _active.remove(self)
        return False

    def watch(self, *tensors):
        for t in tensors:
            if not isinstance(t, Tensor):
                raise TypeError("only Tensor objects can be watched")
            self._tracked[id(t)] = t
        return tensors[0] if len(tensors) == 1 else tensors

    def is_tracked(self, t):
        return id(t) in self._tracked

    def _record(self, op, out, inputs, vjp):
        self.records.append(_Record(op, out, inputs, vjp))
        self._tracked[id(out)] = out


def _emit(op, out_data, inputs, vjp):
    out = Tensor._wrap(out_data)
    for tape in _active:
        if any(tape.is_tracked(t) for t in inputs):
            tape._record(op, out, inputs, vjp)
    return out


class Gradients:
    """Mapping from tensors to gradient arrays, returned by :func:`backward`.

    Looking up a tensor that did not influence the output gives zeros.
    """

    def __init__(self, grads, tensors):
        self._grads = grads
        self._tensors = tensors

    def __getitem__(self, t):
        g = self._grads.get(id(t))
        if g is None:
            if id(t) not in self._tensors:
                raise KeyError(f"{t!r} was not recorded on the tape")
            return np.zeros(t.shape)
        return g

    def __contains__(self, t):
        return id(t) in self._tensors

    def __len__(self):
        return len(self._tensors)

    def tensors(self):
        return list(self._tensors.values())


def backward(tape, output):
    """Reverse pass over ``tape`` from a scalar ``output``.

    Returns a :class:`Gradients` map holding d(output)/d(t) for every tensor
    watched on or produced by the tape.
    """
    if output.size != 1:
        raise ShapeError(f"backward: output must have exactly one element, got shape {output.shape}")
    if tape.consumed:
        raise RuntimeError("tape has already been consumed by a backward pass")
    if not tape.is_tracked(output):
        raise ValueError("backward: output was not produced under this tape")
    if tape in _active:
        raise RuntimeError("backward called while the tape is still recording")
    tape.consumed = True

    grads = {id(output): np.ones(output.shape)}
    for rec in reversed(tape.records):
        g = grads.get(id(rec.out))
        if g is None:
            continue
        needs = tuple(tape.is_tracked(t) for t in rec.inputs)
        in_grads = rec.vjp(g, needs)
        for t, gi, need in zip(rec.inputs, in_grads, needs):
            if gi is None or not need:
                continue
            prev = grads.get(id(t))
            grads[id(t)] = gi if prev is None else prev + gi
    return Gradients(grads, dict(tape._tracked))


def _scalar(value):
    return float(np.asarray(value.data if isinstance(value, Tensor) else value))


def finite_difference_check(f, x, step=1e-5, analytic=None, floor=1e-8, vectorized_f=None, chunk=256):
    """Compare the reverse-mode gradient of scalar ``f`` at ``x`` with central differences.

    ``f`` maps a Tensor to a one-element Tensor (or a float, when
    ``analytic`` is given). If ``analytic`` is given it is
    used instead of recomputing the gradient through a tape. When
    ``vectorized_f`` is given it must map an array of stacked inputs
    ``(M, *x.shape)`` to the ``M`` function values; the perturbed points are
    then evaluated ``chunk`` at a time.

    Returns ``max_i |g_i - fd_i| / max(|g_i|, floor)``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = _as_tensor(x)
    if analytic is None:
        with Tape() as tape:
            tape.watch(x)
            y = f(x)
        analytic = backward(tape, y)[x]
    base = x.data.ravel()
    n = base.size
    fd = np.empty(n)
    if vectorized_f is None:
        for i in range(n):
            up = base.copy()
            up[i] += step
            down = base.copy()
            down[i] -= step
            fp = _scalar(f(Tensor(up.reshape(x.shape))))
            fm = _scalar(f(Tensor(down.reshape(x.shape))))
            fd[i] = (fp - fm) / (2.0 * step)
    else:
        for start in range(0, n, chunk):
            idx = np.arange(start, min(start + chunk, n))
            pts = np.repeat(base[None, :], 2 * idx.size, axis=0)
            pts[np.arange(idx.size), idx] += step
            pts[idx.size + np.arange(idx.size), idx] -= step
            vals = np.asarray(vectorized_f(pts.reshape((-1,) + x.shape)), dtype=np.float64)
            fd[idx] = (vals[:idx.size] - vals[idx.size:]) / (2.0 * step)
    a = np.asarray(analytic, dtype=np.float64).ravel()
    denom = np.maximum(np.abs(a), floor)
    return float(np.max(np.abs(a - fd) / denom)) if a.size else 0.0


def _require_same(op, a, b):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# --- primitives -------------------------------------------------------------


def matmul(a, b):
    """(n, k) @ (k, m) -> (n, m)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    A, B = a.data, b.data

    def vjp(g, needs):
        return (g @ B.T if needs[0] else None), (A.T @ g if needs[1] else None)

    return _emit("matmul", A @ B, (a, b), vjp)


def add_bias(x, b):
    """Add a bias vector along the last axis."""
    x, b = _as_tensor(x), _as_tensor(b)
    if b.data.ndim != 1 or x.shape[-1] != b.shape[0]:
        raise ShapeError(f"add_bias: shape mismatch {x.shape} vs {b.shape}")
    axes = tuple(range(x.data.ndim - 1))

    def vjp(g, needs):
        return g, (g.sum(axis=axes) if needs[1] else None)

    return _emit("add_bias", x.data + b.data, (x, b), vjp)


def relu(x):
    x = _as_tensor(x)
    X = x.data

    def vjp(g, needs):
        return (g * (X > 0),)

    return _emit("relu", np.maximum(X, 0.0), (x,), vjp)


def tanh(x):
    x = _as_tensor(x)
    y = np.tanh(x.data)

    def vjp(g, needs):
        return (g * (1.0 - y * y),)

    return _emit("tanh", y, (x,), vjp)


def softmax(x):
    """Softmax over the last axis (max-subtracted)."""
    x = _as_tensor(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def vjp(g, needs):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _emit("softmax", y, (x,), vjp)


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _require_same("add", a, b)
    return _emit("add", a.data + b.data, (a, b), lambda g, needs: (g, g))


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _require_same("sub", a, b)
    return _emit("sub", a.data - b.data, (a, b), lambda g, needs: (g, -g))


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _require_same("mul", a, b)
    A, B = a.data, b.data
    return _emit("mul", A * B, (a, b), lambda g, needs: (g * B if needs[0] else None, g * A if needs[1] else None))


def scale(x, s):
    """Multiply by a constant scalar."""
    x = _as_tensor(x)
    s = float(s)
    return _emit("scale", x.data * s, (x,), lambda g, needs: (g * s,))


def add_scalar(x, s):
    x = _as_tensor(x)
    return _emit("add_scalar", x.data + float(s), (x,), lambda g, needs: (g,))


def square(x):
    x = _as_tensor(x)
    X = x.data
    return _emit("square", X * X, (x,), lambda g, needs: (2.0 * X * g,))


def log(x):
    x = _as_tensor(x)
    if np.any(x.data <= 0):
        raise ValueError("log: non-positive input")
    X = x.data
    return _emit("log", np.log(X), (x,), lambda g, needs: (g / X,))


def clip(x, lo, hi):
    """Clamp into [lo, hi]; the gradient is zero where the input lies outside."""
    x = _as_tensor(x)
    inside = (x.data >= lo) & (x.data <= hi)
    return _emit("clip", np.clip(x.data, lo, hi), (x,), lambda g, needs: (g * inside,))


def sum(x, axis=None):
    x = _as_tensor(x)
    shape = x.shape
    if axis is None:
        return _emit("sum", np.array(x.data.sum()), (x,), lambda g, needs: (np.broadcast_to(g, shape).copy(),))
    axis = axis % x.data.ndim

    def vjp(g, needs):
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _emit("sum", x.data.sum(axis=axis), (x,), vjp)


def mean(x, axis=None):
    x = _as_tensor(x)
    n = x.size if axis is None else x.shape[axis]
    return scale(sum(x, axis=axis), 1.0 / n)


def reshape(x, shape):
    x = _as_tensor(x)
    shape = tuple(shape)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {x.shape} into {shape}") from None
    old = x.shape
    return _emit("reshape", out, (x,), lambda g, needs: (g.reshape(old),))


def _pad_spatial(X, p, padding):
    if p == 0:
        return X
    width = ((0, 0), (p, p), (p, p), (0, 0))
    if padding == "zero":
        return np.pad(X, width)
    return np.pad(X, width, mode="wrap")


def _unpad_spatial(G, p, padding, H, W):
    if p == 0:
        return G
    if padding == "zero":
        return G[:, p:p + H, p:p + W, :]
    rows = np.arange(-p, H + p) % H
    cols = np.arange(-p, W + p) % W
    out = np.zeros((G.shape[0], H, G.shape[2], G.shape[3]))
    np.add.at(out, (slice(None), rows), G)
    res = np.zeros((G.shape[0], H, W, G.shape[3]))
    np.add.at(res, (slice(None), slice(None), cols), out)
    return res


def conv2d(x, w, padding="zero"):
    """Stride-1 'same' cross-correlation.

    x: (N, H, W, C_in); w: (C_out, C_in, k, k) with odd k.
    padding: "zero" or "circular".
    """
    x, w = _as_tensor(x), _as_tensor(w)
    if padding not in ("zero", "circular"):
        raise ValueError(f"conv2d: unknown padding {padding!r}")
    if x.data.ndim != 4 or w.data.ndim != 4 or w.shape[1] != x.shape[3] or w.shape[2] != w.shape[3]:
        raise ShapeError(f"conv2d: incompatible shapes {x.shape} and {w.shape}")
    k = w.shape[2]
    if k % 2 != 1:
        raise ShapeError(f"conv2d: kernel size must be odd, got shape {w.shape}")
    N, H, W, C = x.shape
    if padding == "circular" and (H < k or W < k):
        raise ShapeError(f"conv2d: circular padding needs input at least kernel size, got {x.shape} and {w.shape}")
    Cout = w.shape[0]
    p = k // 2
    xp = _pad_spatial(x.data, p, padding)
    # (N, H, W, C, k, k) -> rows of C*k*k
    cols = sliding_window_view(xp, (k, k), axis=(1, 2)).reshape(N * H * W, C * k * k)
    wmat = w.data.reshape(Cout, C * k * k)
    out = (cols @ wmat.T).reshape(N, H, W, Cout)

    def vjp(g, needs):
        g2 = g.reshape(N * H * W, Cout)
        gw = (g2.T @ cols).reshape(w.shape) if needs[1] else None
        gx = None
        if needs[0]:
            gxp = np.zeros(xp.shape)
            if C == 1:
                dcols = (g2 @ wmat).reshape(N, H, W, k, k)
                for a in range(k):
                    for b in range(k):
                        gxp[:, a:a + H, b:b + W, 0] += dcols[..., a, b]
            else:
                for a in range(k):
                    for b in range(k):
                        wab = np.ascontiguousarray(w.data[:, :, a, b])
                        gxp[:, a:a + H, b:b + W, :] += (g2 @ wab).reshape(N, H, W, C)
            gx = _unpad_spatial(gxp, p, padding, H, W)
        return gx, gw

    return _emit("conv2d", out, (x, w), vjp)


def maxpool2x2(x):
    """2x2 max pooling with stride 2 on (N, H, W, C); odd trailing rows/cols are dropped.

    The gradient of a tied window goes to its first maximum in row-major order.
    """
    x = _as_tensor(x)
    if x.data.ndim != 4 or x.shape[1] < 2 or x.shape[2] < 2:
        raise ShapeError(f"maxpool2x2: expected (N, H>=2, W>=2, C), got {x.shape}")
    X = x.data
    N, H, W, C = X.shape
    H2, W2 = H // 2, W // 2
    views = [X[:, i:2 * H2:2, j:2 * W2:2, :] for i in (0, 1) for j in (0, 1)]
    out = np.maximum(np.maximum(views[0], views[1]), np.maximum(views[2], views[3]))

    def vjp(g, needs):
        gx = np.empty(X.shape)
        taken = None
        for q, ((i, j), v) in enumerate(zip(((0, 0), (0, 1), (1, 0), (1, 1)), views)):
            if q == 0:
                hit = v == out
                taken = hit.copy()
            elif q < 3:
                hit = v == out
                hit &= ~taken
                taken |= hit
            else:
                hit = ~taken
            np.multiply(g, hit, out=gx[:, i:2 * H2:2, j:2 * W2:2, :])
        if H % 2 or W % 2:
            # dropped trailing row/col receive no gradient
            gx[:, 2 * H2:, :, :] = 0.0
            gx[:, :, 2 * W2:, :] = 0.0
        return (gx,)

    return _emit("maxpool2x2", out, (x,), vjp)
