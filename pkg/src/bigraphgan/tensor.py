"""Dense tensors with reverse-mode differentiation on top of numpy.

Every differentiable primitive used by the networks lives here. A tensor
produced by an operation keeps references to its parents and a closure that
pushes the output gradient back to them; :meth:`Tensor.backward` replays
those closures in reverse topological order.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError, ContractError, DimensionError

_DEFAULT_DTYPE = np.dtype(np.float32)
_GRAD_ENABLED = True


def get_default_dtype() -> np.dtype:
    return _DEFAULT_DTYPE


def set_default_dtype(dtype) -> None:
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ConfigurationError(f"unsupported dtype {dtype}")
    _DEFAULT_DTYPE = dtype


@contextlib.contextmanager
def precision(dtype):
    """Temporarily switch the dtype used for newly created tensors."""
    previous = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording; results never require grad."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


class Tensor:
    """An n-dimensional array that can participate in a differentiation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")
    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            dtype = _DEFAULT_DTYPE
        self.data = np.ascontiguousarray(data, dtype=dtype)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self.op = "leaf"

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __len__(self) -> int:
        return self.shape[0]

    # -- operators --------------------------------------------------------
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def backward(self) -> None:
        backward(self)


def as_tensor(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    if dtype is None:
        dtype = _DEFAULT_DTYPE
    return Tensor(np.asarray(value, dtype=dtype), dtype=dtype)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn, op: str) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.op = op
    needs = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out.requires_grad = needs
    if needs:
        out._parents = tuple(parents)
        out._backward = backward_fn
    else:
        out._parents = ()
        out._backward = None
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if g.dtype != t.data.dtype:
        g = g.astype(t.data.dtype)
    t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _coerce(a, b):
    if not isinstance(a, Tensor):
        a = as_tensor(a, dtype=b.dtype if isinstance(b, Tensor) else None)
    if not isinstance(b, Tensor):
        b = as_tensor(b, dtype=a.dtype)
    return a, b


def _broadcast_check(a: Tensor, b: Tensor, name: str) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{name}: shapes {a.shape} and {b.shape} do not broadcast") from None


# -- element-wise arithmetic ---------------------------------------------
def add(a, b) -> Tensor:
    a, b = _coerce(a, b)
    _broadcast_check(a, b, "add")

    def bw(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a, b = _coerce(a, b)
    _broadcast_check(a, b, "sub")

    def bw(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(-g, b.shape))

    return _make(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    a, b = _coerce(a, b)
    _broadcast_check(a, b, "mul")

    def bw(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), bw, "mul")


def div(a, b) -> Tensor:
    a, b = _coerce(a, b)
    _broadcast_check(a, b, "div")
    out = a.data / b.data

    def bw(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(-g * out / b.data, b.shape))

    return _make(out, (a, b), bw, "div")


def square(x: Tensor) -> Tensor:
    def bw(g):
        _accumulate(x, 2.0 * g * x.data)

    return _make(x.data * x.data, (x,), bw, "square")


def sqrt(x: Tensor) -> Tensor:
    out = np.sqrt(x.data)

    def bw(g):
        _accumulate(x, g * 0.5 / out)

    return _make(out, (x,), bw, "sqrt")


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)

    def bw(g):
        _accumulate(x, g * out)

    return _make(out, (x,), bw, "exp")


def log(x: Tensor) -> Tensor:
    def bw(g):
        _accumulate(x, g / x.data)

    return _make(np.log(x.data), (x,), bw, "log")


def absolute(x: Tensor) -> Tensor:
    def bw(g):
        _accumulate(x, g * np.sign(x.data))

    return _make(np.abs(x.data), (x,), bw, "abs")


# -- activations ------------------------------------------------------------
def sigmoid(x: Tensor) -> Tensor:
    out = expit(x.data)

    def bw(g):
        _accumulate(x, g * out * (1.0 - out))

    return _make(out, (x,), bw, "sigmoid")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def bw(g):
        _accumulate(x, g * (1.0 - out * out))

    return _make(out, (x,), bw, "tanh")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def bw(g):
        _accumulate(x, g * mask)

    return _make(x.data * mask, (x,), bw, "relu")


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    scale = np.where(x.data > 0, 1.0, slope).astype(x.dtype)

    def bw(g):
        _accumulate(x, g * scale)

    return _make(x.data * scale, (x,), bw, "leaky_relu")


def softplus(x: Tensor) -> Tensor:
    """log(1 + e^x), evaluated without overflow."""
    d = x.data
    out = np.maximum(d, 0) + np.log1p(np.exp(-np.abs(d)))

    def bw(g):
        _accumulate(x, g * expit(d))

    return _make(out.astype(d.dtype, copy=False), (x,), bw, "softplus")


# -- reductions & shape ----------------------------------------------------
def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, np.broadcast_to(g, x.shape).copy())

    return _make(np.asarray(out), (x,), bw, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        n = x.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([x.shape[a] for a in axes]))
    if n == 0:
        raise ContractError("mean of an empty tensor")
    return mul(tsum(x, axis, keepdims), 1.0 / n)


def reshape(x: Tensor, shape) -> Tensor:
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"cannot reshape {x.shape} into {tuple(shape)}") from None

    def bw(g):
        _accumulate(x, g.reshape(x.shape))

    return _make(out, (x,), bw, "reshape")


def transpose(x: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inverse = np.argsort(axes)

    def bw(g):
        _accumulate(x, np.ascontiguousarray(g.transpose(inverse)))

    return _make(np.ascontiguousarray(x.data.transpose(axes)), (x,), bw, "transpose")


def swap_last(x: Tensor) -> Tensor:
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, tuple(axes))


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    tensors = list(tensors)
    shapes = [t.shape for t in tensors]
    for s in shapes[1:]:
        if len(s) != len(shapes[0]) or any(
            a != b for i, (a, b) in enumerate(zip(s, shapes[0])) if i != axis % len(s)
        ):
            raise DimensionError(f"concat along axis {axis}: incompatible shapes {shapes}")
    bounds = np.cumsum([0] + [s[axis] for s in shapes])

    def bw(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                _accumulate(t, np.ascontiguousarray(g[tuple(idx)]))

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tensors, bw, "concat")


def split(x: Tensor, sections: int, axis: int = 1) -> list:
    """Split into ``sections`` equal chunks along ``axis``."""
    n = x.shape[axis]
    if n % sections:
        raise ConfigurationError(f"cannot split extent {n} into {sections} equal parts")
    step = n // sections
    return [narrow(x, axis, i * step, step) for i in range(sections)]


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def bw(g):
        full = np.zeros(x.shape, dtype=x.dtype)
        full[idx] = g
        _accumulate(x, full)

    return _make(np.ascontiguousarray(x.data[idx]), (x,), bw, "narrow")


# -- linear algebra ----------------------------------------------------------
def matmul(a, b) -> Tensor:
    """Matrix product with numpy batch broadcasting over leading axes."""
    a, b = _coerce(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise DimensionError(f"matmul: batch shapes {a.shape} and {b.shape} do not broadcast") from None

    def bw(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape))

    return _make(out, (a, b), bw, "matmul")


# -- convolution ---------------------------------------------------------------
def conv_output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    span = size + 2 * pad - kernel
    if span < 0 or span % stride:
        raise ConfigurationError(
            f"conv: extent {size} with kernel {kernel}, stride {stride}, pad {pad} "
            "does not give an integral output size"
        )
    return span // stride + 1


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    # cols[c, i, j, b, y, x] = xp[b, c, y*stride + i, x*stride + j]
    b, c = xp.shape[:2]
    cols = np.empty((c, kh, kw, b, oh, ow), dtype=xp.dtype)
    xt = xp.transpose(1, 0, 2, 3)
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = xt[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
    return cols


def _col2im(cols: np.ndarray, shape: tuple, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    c, _, _, b, oh, ow = cols.shape
    h, w = shape[2] + 2 * pad, shape[3] + 2 * pad
    out = np.zeros((c, b, h, w), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += cols[:, i, j]
    out = out[:, :, pad : h - pad, pad : w - pad] if pad else out
    return np.ascontiguousarray(out.transpose(1, 0, 2, 3))


def _pad(x: np.ndarray, pad: int) -> np.ndarray:
    if not pad:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


# stride-1 kernels with at least this many taps skip im2col: the product is
# accumulated one tap at a time, which is cheaper and keeps memory flat
_SHIFT_TAPS = 25


def _conv_shift(xp: np.ndarray, w: np.ndarray, oh: int, ow: int) -> np.ndarray:
    co, _, kh, kw = w.shape
    xt = np.ascontiguousarray(xp.transpose(1, 0, 2, 3))
    out = np.zeros((co, xp.shape[0], oh, ow), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            out += np.tensordot(w[:, :, i, j], xt[:, :, i : i + oh, j : j + ow], axes=(1, 0))
    return out


def _weight_grad_shift(g: np.ndarray, x: np.ndarray, pad: int, w_shape: tuple) -> np.ndarray:
    # dW[o, c, i, j] = sum over b, y, x of g[b, o, y, x] * xp[b, c, y + i, x + j]
    _, co, oh, ow = g.shape
    ci, kh, kw = w_shape[1:]
    g2 = g.transpose(1, 0, 2, 3).reshape(co, -1)
    xt = _pad(x, pad).transpose(1, 0, 2, 3)
    dw = np.empty(w_shape, dtype=g.dtype)
    for i in range(kh):
        for j in range(kw):
            patch = np.ascontiguousarray(xt[:, :, i : i + oh, j : j + ow]).reshape(ci, -1)
            dw[:, :, i, j] = g2 @ patch.T
    return dw


def _conv_core(x: np.ndarray, w: np.ndarray, stride: int, pad: int):
    """Returns (output, cols); cols is None when the shift path was taken."""
    b, c, h, wd = x.shape
    co, ci, kh, kw = w.shape
    oh = conv_output_size(h, kh, stride, pad)
    ow = conv_output_size(wd, kw, stride, pad)
    if stride == 1 and kh * kw >= _SHIFT_TAPS:
        out = _conv_shift(_pad(x, pad), w, oh, ow)
        return np.ascontiguousarray(out.transpose(1, 0, 2, 3)), None
    if kh == kw == 1 and stride == 1 and pad == 0:
        cols = x.transpose(1, 0, 2, 3).reshape(c, b * h * wd)
    else:
        cols = _im2col(_pad(x, pad), kh, kw, stride, oh, ow).reshape(c * kh * kw, b * oh * ow)
    out = (w.reshape(co, -1) @ cols).reshape(co, b, oh, ow).transpose(1, 0, 2, 3)
    return np.ascontiguousarray(out), cols


def _conv_input_grad(g: np.ndarray, w: np.ndarray, in_shape: tuple, stride: int, pad: int) -> np.ndarray:
    b, co, oh, ow = g.shape
    _, ci, kh, kw = w.shape
    g2 = g.transpose(1, 0, 2, 3).reshape(co, -1)
    dcols = w.reshape(co, -1).T @ g2
    if kh == kw == 1 and stride == 1 and pad == 0:
        return np.ascontiguousarray(dcols.reshape(ci, b, oh, ow).transpose(1, 0, 2, 3))
    return _col2im(dcols.reshape(ci, kh, kw, b, oh, ow), in_shape, kh, kw, stride, pad)


def _conv_weight_grad(g: np.ndarray, cols, w_shape: tuple, x: np.ndarray = None, pad: int = 0) -> np.ndarray:
    if cols is None:
        return _weight_grad_shift(g, x, pad, w_shape)
    co = g.shape[1]
    g2 = g.transpose(1, 0, 2, 3).reshape(co, -1)
    return (cols @ g2.T).T.reshape(w_shape)


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D cross-correlation. ``weight`` has shape (out, in, kh, kw)."""
    if x.ndim != 4 or weight.ndim != 4:
        raise DimensionError(f"conv2d expects 4-d input and kernel, got {x.shape} and {weight.shape}")
    if x.shape[1] != weight.shape[1]:
        raise DimensionError(f"conv2d: input {x.shape} has {x.shape[1]} channels, kernel {weight.shape} expects {weight.shape[1]}")
    out, cols = _conv_core(x.data, weight.data, stride, pad)
    parents = [x, weight]
    if bias is not None:
        out += bias.data.reshape(1, -1, 1, 1)
        parents.append(bias)

    def bw(g):
        if x.requires_grad:
            _accumulate(x, _conv_input_grad(g, weight.data, x.shape, stride, pad))
        if weight.requires_grad:
            _accumulate(weight, _conv_weight_grad(g, cols, weight.shape, x.data, pad))
        if bias is not None and bias.requires_grad:
            _accumulate(bias, g.sum(axis=(0, 2, 3)))

    return _make(out, parents, bw, "conv2d")


def conv_transpose2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1, pad: int = 0) -> Tensor:
    """Transposed convolution; ``weight`` has shape (in, out, kh, kw).

    Output extent is ``(h - 1) * stride - 2 * pad + k``, the exact adjoint of
    :func:`conv2d` with the same kernel.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise DimensionError(f"conv_transpose2d expects 4-d input and kernel, got {x.shape} and {weight.shape}")
    if x.shape[1] != weight.shape[0]:
        raise DimensionError(f"conv_transpose2d: input {x.shape} has {x.shape[1]} channels, kernel {weight.shape} expects {weight.shape[0]}")
    b, _, h, w = x.shape
    _, co, kh, kw = weight.shape
    oh = (h - 1) * stride - 2 * pad + kh
    ow = (w - 1) * stride - 2 * pad + kw
    if oh <= 0 or ow <= 0:
        raise ConfigurationError(f"conv_transpose2d: non-positive output size {(oh, ow)}")
    out_shape = (b, co, oh, ow)
    out = _conv_input_grad(x.data, weight.data, out_shape, stride, pad)
    parents = [x, weight]
    if bias is not None:
        out += bias.data.reshape(1, -1, 1, 1)
        parents.append(bias)

    def bw(g):
        need_w = weight.requires_grad
        if x.requires_grad or need_w:
            dx, cols = _conv_core(g, weight.data, stride, pad)
            _accumulate(x, dx)
            if need_w:
                # weight is (in, out, k, k); gradient pairs x channels with g patches
                _accumulate(weight, _conv_weight_grad(x.data, cols, weight.shape, g, pad))
        if bias is not None and bias.requires_grad:
            _accumulate(bias, g.sum(axis=(0, 2, 3)))

    return _make(out, parents, bw, "conv_transpose2d")


# -- normalization ---------------------------------------------------------------
def instance_norm(x: Tensor, gamma: Optional[Tensor] = None, beta: Optional[Tensor] = None, eps: float = 1e-5) -> Tensor:
    """Per-sample, per-channel normalization over the spatial axes."""
    if x.ndim != 4:
        raise DimensionError(f"instance_norm expects b×c×h×w input, got {x.shape}")
    d = x.data
    n = d.shape[2] * d.shape[3]
    mu = d.mean(axis=(2, 3), keepdims=True)
    centered = d - mu
    var = (centered * centered).mean(axis=(2, 3), keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = xhat
    parents = [x]
    if gamma is not None:
        out = out * gamma.data.reshape(1, -1, 1, 1)
        parents.append(gamma)
    if beta is not None:
        out = out + beta.data.reshape(1, -1, 1, 1)
        parents.append(beta)

    def bw(g):
        if gamma is not None and gamma.requires_grad:
            _accumulate(gamma, (g * xhat).sum(axis=(0, 2, 3)))
        if beta is not None and beta.requires_grad:
            _accumulate(beta, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gh = g * gamma.data.reshape(1, -1, 1, 1) if gamma is not None else g
            s1 = gh.sum(axis=(2, 3), keepdims=True)
            s2 = (gh * xhat).sum(axis=(2, 3), keepdims=True)
            _accumulate(x, (inv_std / n) * (n * gh - s1 - xhat * s2))

    return _make(np.ascontiguousarray(out, dtype=d.dtype), parents, bw, "instance_norm")


# -- differentiation ---------------------------------------------------------------
def _topological_order(root: Tensor) -> list:
    order, seen = [], set()
    stack = [(root, False)]
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
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every tensor reachable from a scalar ``loss``.

    Gradients accumulate into existing ``grad`` arrays; clear them between
    optimizer steps with :func:`zero_grad`.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ContractError("loss does not depend on any tensor that requires grad")
    order = _topological_order(loss)
    _accumulate(loss, np.ones(loss.shape, dtype=loss.dtype))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


@contextlib.contextmanager
def frozen(params: Iterable[Tensor]):
    """Temporarily mark parameters as constants so no weight grads are built."""
    params = [p for p in params if p.requires_grad]
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p in params:
            p.requires_grad = True
