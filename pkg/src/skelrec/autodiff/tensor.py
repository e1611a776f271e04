"""Reverse-mode differentiable tensors over numpy arrays.

Every operation records the inputs it needs for its vector-Jacobian product;
``Tensor.backward()`` on a scalar loss walks the graph once in reverse
topological order and accumulates gradients into every tensor that has
``requires_grad`` set. Training runs in float32; gradient verification builds
the same graphs in float64.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

_FLOAT_DTYPES = (np.float32, np.float64)


class ShapeError(ValueError):
    """Operands have incompatible shapes; message names the op and shapes."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    # -- graph traversal ----------------------------------------------------

    def backward(self) -> None:
        """Populate grads of every tracked tensor reachable from this scalar.

        Repeated calls without zeroing accumulate. Raises on a non-scalar
        loss; tensors with ``requires_grad=False`` are left untouched.
        """
        if self.data.ndim != 0:
            raise ValueError(f"backward requires a scalar loss, got shape {self.data.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))

        buf: dict[int, np.ndarray] = {id(self): np.ones((), dtype=self.data.dtype)}
        for node in reversed(topo):
            g = buf.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                cur = buf.get(id(parent))
                buf[id(parent)] = pg if cur is None else cur + pg

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self):
        return tensor_sum(self)

    def mean(self):
        return tensor_mean(self)


def _wrap(value, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.data.dtype))


def _op(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- arithmetic --------------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    """Elementwise/broadcast addition; also the bias add."""
    b = _wrap(b, a)
    data = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _op(data, (a, b), backward)


def mul(a: Tensor, b) -> Tensor:
    """Elementwise/broadcast multiplication (scalars allowed)."""
    b = _wrap(b, a)
    data = a.data * b.data

    def backward(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _op(data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy's stacked-batch broadcasting."""
    if a.data.shape[-1] != b.data.shape[-2 if b.data.ndim > 1 else 0]:
        raise ShapeError(f"matmul: {a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data

    def backward(g):
        bt = np.swapaxes(b.data, -1, -2) if b.data.ndim > 1 else b.data[None, :]
        at = np.swapaxes(a.data, -1, -2) if a.data.ndim > 1 else a.data[:, None]
        ga = _unbroadcast(g @ bt if b.data.ndim > 1 else np.outer(g, b.data), a.data.shape)
        gb = _unbroadcast(at @ g, b.data.shape)
        return ga, gb

    return _op(data, (a, b), backward)


# -- shape ops ----------------------------------------------------------------


def reshape(x: Tensor, shape) -> Tensor:
    data = x.data.reshape(shape)

    def backward(g):
        return (g.reshape(x.data.shape),)

    return _op(data, (x,), backward)


def transpose(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    data = x.data.transpose(axes)

    def backward(g):
        return (g.transpose(inverse),)

    return _op(data, (x,), backward)


def broadcast_to(x: Tensor, shape) -> Tensor:
    """Materialised broadcast; backward sums over the expanded axes."""
    data = np.broadcast_to(x.data, shape)

    def backward(g):
        return (_unbroadcast(g, x.data.shape),)

    return _op(data, (x,), backward)


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _op(data, tuple(tensors), backward)


def index_select(x: Tensor, index: int, axis: int) -> Tensor:
    """Select one slice along ``axis`` (the class-token readout)."""
    data = np.take(x.data, index, axis=axis)

    def backward(g):
        gx = np.zeros_like(x.data)
        sl = [slice(None)] * x.data.ndim
        sl[axis] = index
        gx[tuple(sl)] = g
        return (gx,)

    return _op(data, (x,), backward)


def patchify(x: Tensor, patch: int) -> Tensor:
    """Split (B, H, W, C) into flattened non-overlapping patches.

    Output is (B, (H/patch)*(W/patch), patch*patch*C), rows ordered
    left-to-right, top-to-bottom.
    """
    B, H, W, C = x.data.shape
    if H % patch or W % patch:
        raise ShapeError(f"patchify: {H}x{W} image not divisible by patch {patch}")
    nh, nw = H // patch, W // patch

    def fold(arr):
        return (
            arr.reshape(B, nh, patch, nw, patch, C)
            .transpose(0, 1, 3, 2, 4, 5)
            .reshape(B, nh * nw, patch * patch * C)
        )

    def unfold(arr):
        return (
            arr.reshape(B, nh, nw, patch, patch, C)
            .transpose(0, 1, 3, 2, 4, 5)
            .reshape(B, H, W, C)
        )

    def backward(g):
        return (unfold(g),)

    return _op(fold(x.data), (x,), backward)


# -- activations and normalisation -------------------------------------------


def relu(x: Tensor) -> Tensor:
    data = np.maximum(x.data, 0)

    def backward(g):
        return (g * (x.data > 0),)

    return _op(data, (x,), backward)


def gelu(x: Tensor) -> Tensor:
    """Exact Gaussian-error-linear unit, x * Phi(x)."""
    cdf = 0.5 * (1.0 + erf(x.data * np.asarray(1.0 / math.sqrt(2.0), dtype=x.data.dtype)))
    pdf = np.exp(-0.5 * x.data * x.data) * np.asarray(
        1.0 / math.sqrt(2.0 * math.pi), dtype=x.data.dtype
    )
    data = x.data * cdf

    def backward(g):
        return (g * (cdf + x.data * pdf),)

    return _op(data, (x,), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        return ((g - dot) * data,)

    return _op(data, (x,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis to zero mean / unit variance, then affine."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.data.dtype))
    xhat = xc * inv
    data = xhat * gamma.data + beta.data

    def backward(g):
        dgamma = _unbroadcast(g * xhat, gamma.data.shape)
        dbeta = _unbroadcast(g, beta.data.shape)
        dxhat = g * gamma.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        dx = (dxhat - m1 - xhat * m2) * inv
        return dx, dgamma, dbeta

    return _op(data, (x, gamma, beta), backward)


def dropout(x: Tensor, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout; identity in evaluation mode."""
    if not training or p == 0.0:
        return x
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    scale = 1.0 / (1.0 - p)
    mask = (rng.random(x.data.shape, dtype=x.data.dtype) >= p).astype(x.data.dtype) * np.asarray(
        scale, dtype=x.data.dtype
    )
    data = x.data * mask

    def backward(g):
        return (g * mask,)

    return _op(data, (x,), backward)


# -- convolution and pooling ---------------------------------------------------


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """2-D convolution, stride 1, valid padding, channels-last.

    x is (B, H, W, Cin); w is (kh, kw, Cin, Cout).
    """
    if x.data.ndim != 4 or w.data.ndim != 4 or x.data.shape[3] != w.data.shape[2]:
        raise ShapeError(f"conv2d: input {x.data.shape} vs kernel {w.data.shape}")
    B, H, W, Ci = x.data.shape
    kh, kw, _, Co = w.data.shape
    Ho, Wo = H - kh + 1, W - kw + 1
    if Ho < 1 or Wo < 1:
        raise ShapeError(f"conv2d: kernel {w.data.shape} larger than input {x.data.shape}")

    out = np.zeros((B, Ho, Wo, Co), dtype=x.data.dtype)
    for di in range(kh):
        for dj in range(kw):
            out += x.data[:, di : di + Ho, dj : dj + Wo, :] @ w.data[di, dj]
    if b is not None:
        out += b.data

    def backward(g):
        gw = np.empty_like(w.data)
        gx = np.zeros_like(x.data)
        for di in range(kh):
            for dj in range(kw):
                patch = x.data[:, di : di + Ho, dj : dj + Wo, :]
                gw[di, dj] = np.tensordot(patch, g, axes=([0, 1, 2], [0, 1, 2]))
                gx[:, di : di + Ho, dj : dj + Wo, :] += g @ w.data[di, dj].T
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0, 1, 2))

    parents = (x, w) if b is None else (x, w, b)
    return _op(out, parents, backward)


def maxpool2d(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; odd trailing rows/columns are dropped."""
    if x.data.ndim != 4:
        raise ShapeError(f"maxpool2d: expected (B, H, W, C), got {x.data.shape}")
    B, H, W, C = x.data.shape
    Ho, Wo = H // 2, W // 2
    if Ho < 1 or Wo < 1:
        raise ShapeError(f"maxpool2d: input {x.data.shape} too small for a 2x2 window")
    windows = (
        x.data[:, : 2 * Ho, : 2 * Wo, :]
        .reshape(B, Ho, 2, Wo, 2, C)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(B, Ho, Wo, 4, C)
    )
    arg = windows.argmax(axis=3)
    data = np.take_along_axis(windows, arg[:, :, :, None, :], axis=3)[:, :, :, 0, :]

    def backward(g):
        gw = np.zeros_like(windows)
        np.put_along_axis(gw, arg[:, :, :, None, :], g[:, :, :, None, :], axis=3)
        gx = np.zeros_like(x.data)
        gx[:, : 2 * Ho, : 2 * Wo, :] = (
            gw.reshape(B, Ho, Wo, 2, 2, C).transpose(0, 1, 3, 2, 4, 5).reshape(B, 2 * Ho, 2 * Wo, C)
        )
        return (gx,)

    return _op(data, (x,), backward)


# -- reductions and loss -------------------------------------------------------


def tensor_sum(x: Tensor) -> Tensor:
    data = np.asarray(x.data.sum(), dtype=x.data.dtype)

    def backward(g):
        return (np.broadcast_to(g, x.data.shape),)

    return _op(data, (x,), backward)


def tensor_mean(x: Tensor) -> Tensor:
    n = x.data.size
    data = np.asarray(x.data.mean(), dtype=x.data.dtype)

    def backward(g):
        return (np.broadcast_to(g / n, x.data.shape),)

    return _op(data, (x,), backward)


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer labels under row softmax."""
    if logits.data.ndim != 2:
        raise ShapeError(f"cross_entropy: logits must be (B, c), got {logits.data.shape}")
    labels = np.asarray(labels)
    B = logits.data.shape[0]
    if labels.shape != (B,):
        raise ShapeError(f"cross_entropy: labels shape {labels.shape} does not match batch {B}")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    data = np.asarray(-logp[np.arange(B), labels].mean(), dtype=logits.data.dtype)

    def backward(g):
        probs = np.exp(logp)
        probs[np.arange(B), labels] -= 1.0
        return (probs * (g / B),)

    return _op(data, (logits,), backward)
