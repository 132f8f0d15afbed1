"""Minimal reverse-mode automatic differentiation over float64 NumPy arrays.

A Tensor wraps an ndarray and remembers how it was produced; backward()
walks the recorded graph in reverse topological order and accumulates
gradients into every reachable Tensor with requires_grad set. The op set
is exactly what the networks and losses need; each op's backward closure
hands its parents arrays of the parent's own shape.

Gradient flow is pruned at construction: an op whose inputs all have
requires_grad=False produces a detached result, so inference passes do
not retain a graph (see no_grad).
"""

from contextlib import contextmanager

import numpy as np

from . import kernels
from .errors import ShapeError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (forward-only passes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    def detach(self):
        return Tensor(self.data)

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Reverse-mode sweep from this tensor.

        With no explicit seed the tensor must be a scalar (seeded with 1).
        """
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward() without a seed needs a scalar tensor")
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=np.float64)
            if grad.shape != self.data.shape:
                raise ShapeError("seed gradient shape mismatch")

        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))

        _accum(self, grad)
        for node in reversed(topo):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    # operator sugar used throughout networks/losses
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _accum(t, g):
    if not (t.requires_grad or t._backward_fn is not None):
        return
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad += g


def _make(data, parents, backward_fn):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad or p._backward_fn is not None for p in parents):
        out.requires_grad = False
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _unbroadcast(g, shape):
    """Reduce a broadcast gradient back to the original operand shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b):
    a = as_tensor(a)
    b = as_tensor(b)
    data = a.data + b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward)


def sub(a, b):
    a = as_tensor(a)
    b = as_tensor(b)
    data = a.data - b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    return _make(data, (a, b), backward)


def mul(a, b):
    a = as_tensor(a)
    b = as_tensor(b)
    data = a.data * b.data

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward)


def matmul(a, b):
    a = as_tensor(a)
    b = as_tensor(b)
    data = a.data @ b.data

    def backward(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(data, (a, b), backward)


def reshape(x, shape):
    x = as_tensor(x)
    data = x.data.reshape(shape)

    def backward(g):
        _accum(x, g.reshape(x.data.shape))

    return _make(data, (x,), backward)


def mean_all(x):
    x = as_tensor(x)
    data = np.asarray(x.data.mean())
    size = x.data.size

    def backward(g):
        _accum(x, np.full(x.data.shape, float(g) / size))

    return _make(data, (x,), backward)


def mean_hw(x):
    """Mean over the spatial axes of an NHWC tensor (global average pooling)."""
    x = as_tensor(x)
    if x.data.ndim != 4:
        raise ShapeError("mean_hw expects an NHWC tensor")
    n, h, w, c = x.data.shape
    data = x.data.mean(axis=(1, 2))

    def backward(g):
        _accum(x, np.broadcast_to(g[:, None, None, :] / (h * w), x.data.shape).copy())

    return _make(data, (x,), backward)


def abs_(x):
    x = as_tensor(x)
    data = np.abs(x.data)

    def backward(g):
        _accum(x, g * np.sign(x.data))

    return _make(data, (x,), backward)


def relu(x):
    x = as_tensor(x)
    data = np.maximum(x.data, 0.0)

    def backward(g):
        _accum(x, g * (x.data > 0.0))

    return _make(data, (x,), backward)


def leaky_relu(x, slope=0.2):
    x = as_tensor(x)
    data = np.where(x.data > 0.0, x.data, slope * x.data)

    def backward(g):
        _accum(x, np.where(x.data > 0.0, g, slope * g))

    return _make(data, (x,), backward)


def tanh(x):
    x = as_tensor(x)
    data = np.tanh(x.data)

    def backward(g):
        _accum(x, g * (1.0 - data * data))

    return _make(data, (x,), backward)


def sigmoid(x):
    x = as_tensor(x)
    z = x.data
    data = np.where(z >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))

    def backward(g):
        _accum(x, g * data * (1.0 - data))

    return _make(data, (x,), backward)


def conv2d(x, w, b=None, stride=1, padding=0):
    """2-D convolution over NHWC input with (kh, kw, cin, cout) weights.

    im2col + GEMM; the patch matrix is rebuilt in backward instead of
    cached, trading a little recompute for a much smaller live set.
    b may be None (convolutions feeding straight into batch norm carry no
    bias; the normalization would cancel it exactly).
    """
    x = as_tensor(x)
    w = as_tensor(w)
    b = as_tensor(b) if b is not None else None
    if x.data.ndim != 4:
        raise ShapeError(f"conv2d input must be NHWC, got {x.data.shape}")
    kh, kw, cin, cout = w.data.shape
    n, h, wd, c = x.data.shape
    if c != cin:
        raise ShapeError(f"conv2d channels mismatch: input {c}, kernel expects {cin}")
    if h + 2 * padding < kh or wd + 2 * padding < kw:
        raise ShapeError("conv2d input smaller than the kernel")
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1

    if padding:
        xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    else:
        xp = x.data
    wmat = w.data.reshape(kh * kw * cin, cout)
    cols = kernels.im2col(xp, kh, kw, stride)
    out = cols @ wmat
    if b is not None:
        out += b.data
    data = out.reshape(n, oh, ow, cout)
    del cols, out

    def backward(g):
        gflat = np.ascontiguousarray(g.reshape(n * oh * ow, cout))
        if b is not None:
            _accum(b, gflat.sum(axis=0))
        cols_b = kernels.im2col(xp, kh, kw, stride)
        _accum(w, (cols_b.T @ gflat).reshape(w.data.shape))
        dcols = gflat @ wmat.T
        dxp = kernels.col2im(dcols, n, h + 2 * padding, wd + 2 * padding, cin, kh, kw, stride)
        if padding:
            dxp = dxp[:, padding:-padding, padding:-padding, :]
        _accum(x, dxp)

    parents = (x, w) if b is None else (x, w, b)
    return _make(data, parents, backward)


def batch_norm(x, gamma, beta, running_mean, running_var, training, eps=1e-5):
    """Channelwise batch normalization over an NHWC tensor.

    In training mode the batch statistics (biased variance) normalize x and
    are returned for the caller to fold into the running buffers; in
    inference mode the running buffers normalize x. Returns
    (out, batch_mean, batch_var) with the stats as plain arrays (None in
    inference mode).
    """
    x = as_tensor(x)
    gamma = as_tensor(gamma)
    beta = as_tensor(beta)
    if x.data.ndim != 4:
        raise ShapeError("batch_norm expects an NHWC tensor")
    if training:
        mu = x.data.mean(axis=(0, 1, 2))
        var = x.data.var(axis=(0, 1, 2))
    else:
        mu = running_mean
        var = running_var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    data = gamma.data * xhat + beta.data
    m = x.data.shape[0] * x.data.shape[1] * x.data.shape[2]

    def backward(g):
        dgamma = (g * xhat).sum(axis=(0, 1, 2))
        dbeta = g.sum(axis=(0, 1, 2))
        _accum(gamma, dgamma)
        _accum(beta, dbeta)
        if training:
            dx = (gamma.data * inv) * (g - dbeta / m - xhat * (dgamma / m))
        else:
            dx = g * (gamma.data * inv)
        _accum(x, dx)

    out = _make(data, (x, gamma, beta), backward)
    if training:
        return out, mu, var
    return out, None, None


def upsample2x(x):
    """Nearest-neighbour 2x upsampling of an NHWC tensor."""
    x = as_tensor(x)
    if x.data.ndim != 4:
        raise ShapeError("upsample2x expects an NHWC tensor")
    n, h, w, c = x.data.shape
    data = x.data.repeat(2, axis=1).repeat(2, axis=2)

    def backward(g):
        _accum(x, g.reshape(n, h, 2, w, 2, c).sum(axis=(2, 4)))

    return _make(data, (x,), backward)


def concat_channels(a, b):
    a = as_tensor(a)
    b = as_tensor(b)
    if a.data.shape[:3] != b.data.shape[:3]:
        raise ShapeError(
            f"concat_channels spatial mismatch: {a.data.shape} vs {b.data.shape}"
        )
    ca = a.data.shape[3]
    data = np.concatenate([a.data, b.data], axis=3)

    def backward(g):
        _accum(a, np.ascontiguousarray(g[..., :ca]))
        _accum(b, np.ascontiguousarray(g[..., ca:]))

    return _make(data, (a, b), backward)


def narrow(x, axis, start, size):
    """Contiguous slice along one axis."""
    x = as_tensor(x)
    idx = [slice(None)] * x.data.ndim
    idx[axis] = slice(start, start + size)
    idx = tuple(idx)
    data = np.ascontiguousarray(x.data[idx])

    def backward(g):
        gx = np.zeros_like(x.data)
        gx[idx] = g
        _accum(x, gx)

    return _make(data, (x,), backward)


def flip_w(x):
    """Reverse an NHWC tensor along its width axis."""
    x = as_tensor(x)
    data = np.ascontiguousarray(x.data[:, :, ::-1, :])

    def backward(g):
        _accum(x, np.ascontiguousarray(g[:, :, ::-1, :]))

    return _make(data, (x,), backward)


def softmax_cross_entropy(logits, labels):
    """Mean cross entropy of row-wise softmax against integer labels."""
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    n = logits.data.shape[0]
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    ez = np.exp(z)
    p = ez / ez.sum(axis=1, keepdims=True)
    data = np.asarray(-np.log(p[np.arange(n), labels] + 1e-300).mean())

    def backward(g):
        dl = p.copy()
        dl[np.arange(n), labels] -= 1.0
        _accum(logits, dl * (float(g) / n))

    return _make(data, (logits,), backward)
