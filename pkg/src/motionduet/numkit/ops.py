"""Op set for the Tensor graph.

Every op returns a fresh Tensor and, when a parent requires gradients,
attaches a backward closure.  Subgradient conventions at kinks: relu'(0)
is 0 and d|x|/dx at 0 is 0.
"""

from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from .. import _kernels
from .tensor import Tensor, as_tensor, finite_or_raise, is_checked

Axis = Union[int, tuple, None]

_SQRT_2_OVER_PI = float(np.sqrt(2.0 / np.pi))
_GELU_CUBIC = 0.044715


def _result(data: np.ndarray, parents: Sequence[Tensor], name: str) -> Tensor:
    if is_checked():
        finite_or_raise(data, name)
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._prev = tuple(parents)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to the shape it was broadcast from."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- arithmetic ---------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _result(a.data + b.data, (a, b), "add")
    if out.requires_grad:

        def backward():
            if a.requires_grad:
                a._accumulate(_unbroadcast(out.grad, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(out.grad, b.data.shape))

        out._backward = backward
    return out


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _result(a.data - b.data, (a, b), "sub")
    if out.requires_grad:

        def backward():
            if a.requires_grad:
                a._accumulate(_unbroadcast(out.grad, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(-out.grad, b.data.shape))

        out._backward = backward
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _result(a.data * b.data, (a, b), "mul")
    if out.requires_grad:

        def backward():
            if a.requires_grad:
                a._accumulate(_unbroadcast(out.grad * b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(out.grad * a.data, b.data.shape))

        out._backward = backward
    return out


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _result(a.data / b.data, (a, b), "div")
    if out.requires_grad:

        def backward():
            if a.requires_grad:
                a._accumulate(_unbroadcast(out.grad / b.data, a.data.shape))
            if b.requires_grad:
                gb = -out.grad * a.data / (b.data * b.data)
                b._accumulate(_unbroadcast(gb, b.data.shape))

        out._backward = backward
    return out


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _result(a.data @ b.data, (a, b), "matmul")
    if out.requires_grad:

        def backward():
            if a.requires_grad:
                ga = out.grad @ b.data.swapaxes(-1, -2)
                a._accumulate(_unbroadcast(ga, a.data.shape))
            if b.requires_grad:
                gb = a.data.swapaxes(-1, -2) @ out.grad
                b._accumulate(_unbroadcast(gb, b.data.shape))

        out._backward = backward
    return out


# -- nonlinearities -----------------------------------------------------------


def relu(x) -> Tensor:
    x = as_tensor(x)
    out = _result(np.maximum(x.data, 0.0), (x,), "relu")
    if out.requires_grad:

        def backward():
            x._accumulate(out.grad * (x.data > 0.0))

        out._backward = backward
    return out


def gelu(x) -> Tensor:
    x = as_tensor(x)
    # x*x*x instead of x**3: np.power is an order of magnitude slower
    sq = x.data * x.data
    inner = _SQRT_2_OVER_PI * (x.data + _GELU_CUBIC * (sq * x.data))
    t = np.tanh(inner)
    out = _result(0.5 * x.data * (1.0 + t), (x,), "gelu")
    if out.requires_grad:

        def backward():
            dinner = _SQRT_2_OVER_PI * (1.0 + 3.0 * _GELU_CUBIC * sq)
            local = 0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t * t) * dinner
            x._accumulate(out.grad * local)

        out._backward = backward
    return out


def softplus(x) -> Tensor:
    """log(1 + exp(x)), numerically stable; maps reals onto (0, inf)."""
    x = as_tensor(x)
    out = _result(np.logaddexp(0.0, x.data), (x,), "softplus")
    if out.requires_grad:

        def backward():
            x._accumulate(out.grad / (1.0 + np.exp(-x.data)))

        out._backward = backward
    return out


def tanh(x) -> Tensor:
    x = as_tensor(x)
    t = np.tanh(x.data)
    out = _result(t, (x,), "tanh")
    if out.requires_grad:

        def backward():
            x._accumulate(out.grad * (1.0 - t * t))

        out._backward = backward
    return out


def abs_(x) -> Tensor:
    x = as_tensor(x)
    out = _result(np.abs(x.data), (x,), "abs")
    if out.requires_grad:

        def backward():
            x._accumulate(out.grad * np.sign(x.data))

        out._backward = backward
    return out


# -- reductions ---------------------------------------------------------------


def _reduce_grad(grad: np.ndarray, shape: tuple, axis: Axis, keepdims: bool):
    if not keepdims and axis is not None:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(a % len(shape) for a in axes)
        for a in sorted(axes):
            grad = np.expand_dims(grad, a)
    return np.broadcast_to(grad, shape)


def sum_(x, axis: Axis = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = _result(x.data.sum(axis=axis, keepdims=keepdims), (x,), "sum")
    if out.requires_grad:

        def backward():
            x._accumulate(
                np.ascontiguousarray(
                    _reduce_grad(out.grad, x.data.shape, axis, keepdims)
                )
            )

        out._backward = backward
    return out


def mean(x, axis: Axis = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = _result(x.data.mean(axis=axis, keepdims=keepdims), (x,), "mean")
    count = x.data.size if out.data.size == 0 else x.data.size // max(out.data.size, 1)
    if out.requires_grad:

        def backward():
            g = _reduce_grad(out.grad, x.data.shape, axis, keepdims)
            x._accumulate(g / count)

        out._backward = backward
    return out


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)
    out = _result(p, (x,), "softmax")
    if out.requires_grad:

        def backward():
            inner = (out.grad * p).sum(axis=axis, keepdims=True)
            x._accumulate(p * (out.grad - inner))

        out._backward = backward
    return out


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean, unit variance, then affine."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = _result(xhat * gain.data + bias.data, (x, gain, bias), "layer_norm")
    if out.requires_grad:

        def backward():
            if gain.requires_grad:
                gain._accumulate(_unbroadcast(out.grad * xhat, gain.data.shape))
            if bias.requires_grad:
                bias._accumulate(_unbroadcast(out.grad, bias.data.shape))
            if x.requires_grad:
                gh = out.grad * gain.data
                m1 = gh.mean(axis=-1, keepdims=True)
                m2 = (gh * xhat).mean(axis=-1, keepdims=True)
                x._accumulate(inv * (gh - m1 - xhat * m2))

        out._backward = backward
    return out


# -- shape moves --------------------------------------------------------------


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out = _result(x.data.reshape(shape), (x,), "reshape")
    if out.requires_grad:

        def backward():
            x._accumulate(out.grad.reshape(x.data.shape))

        out._backward = backward
    return out


def transpose(x, axes: Optional[tuple] = None) -> Tensor:
    x = as_tensor(x)
    out = _result(x.data.transpose(axes), (x,), "transpose")
    if out.requires_grad:
        inverse = None if axes is None else tuple(np.argsort(axes))

        def backward():
            x._accumulate(out.grad.transpose(inverse))

        out._backward = backward
    return out


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out = _result(np.concatenate([p.data for p in parts], axis=axis), parts, "concat")
    if out.requires_grad:
        sizes = [p.data.shape[axis] for p in parts]
        splits = np.cumsum(sizes)[:-1]

        def backward():
            for part, piece in zip(parts, np.split(out.grad, splits, axis=axis)):
                if part.requires_grad:
                    part._accumulate(piece)

        out._backward = backward
    return out


def stack(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out = _result(np.stack([p.data for p in parts], axis=axis), parts, "stack")
    if out.requires_grad:

        def backward():
            for i, part in enumerate(parts):
                if part.requires_grad:
                    part._accumulate(np.take(out.grad, i, axis=axis))

        out._backward = backward
    return out


def take(x, indices, axis: int = 0) -> Tensor:
    """Gather along one axis.  Repeated indices accumulate gradient."""
    x = as_tensor(x)
    idx = np.asarray(indices)
    if idx.dtype.kind not in "iu" or idx.ndim != 1:
        raise ValueError("indices must be a 1-D integer array")
    out = _result(np.take(x.data, idx, axis=axis), (x,), "take")
    if out.requires_grad:

        def backward():
            gx = np.zeros_like(x.data)
            np.add.at(np.moveaxis(gx, axis, 0), idx, np.moveaxis(out.grad, axis, 0))
            x._accumulate(gx)

        out._backward = backward
    return out


# -- structured kernels -------------------------------------------------------


def conv1d(x, k) -> Tensor:
    """Depthwise temporal cross-correlation with "same" zero padding.

    x: (T, D) or (B, T, D).  k: (K,) shared across channels or (K, D)
    per channel, K odd.
    """
    x, k = as_tensor(x), as_tensor(k)
    squeeze = x.data.ndim == 2
    xb = x.data[None] if squeeze else x.data
    if xb.ndim != 3:
        raise ValueError("conv1d input must be (T, D) or (B, T, D)")
    shared = k.data.ndim == 1
    kb = np.repeat(k.data[:, None], xb.shape[2], axis=1) if shared else k.data
    y = _kernels.conv1d_same_fwd(xb, kb)
    out = _result(y[0] if squeeze else y, (x, k), "conv1d")
    if out.requires_grad:

        def backward():
            gy = out.grad[None] if squeeze else out.grad
            gx, gk = _kernels.conv1d_same_bwd(xb, kb, np.ascontiguousarray(gy))
            if x.requires_grad:
                x._accumulate(gx[0] if squeeze else gx)
            if k.requires_grad:
                k._accumulate(gk.sum(axis=1) if shared else gk)

        out._backward = backward
    return out


def spectral_filter(x, w) -> Tensor:
    """Filter along the time axis in the real-FFT domain: irfft(w * rfft(x)).

    x: (..., T, D); w: (T // 2 + 1, D) real magnitudes per frequency bin and
    channel.  The filter scales magnitudes only, so phase is untouched and
    real input maps to real output.
    """
    x, w = as_tensor(x), as_tensor(w)
    t = x.data.shape[-2]
    bins = t // 2 + 1
    if w.data.shape != (bins, x.data.shape[-1]):
        raise ValueError(f"filter must have shape ({bins}, {x.data.shape[-1]})")
    spectrum = np.fft.rfft(x.data, axis=-2)
    y = np.fft.irfft(w.data * spectrum, n=t, axis=-2)
    out = _result(y, (x, w), "spectral_filter")
    if out.requires_grad:

        def backward():
            gspec = np.fft.rfft(out.grad, axis=-2)
            if x.requires_grad:
                # the operator is symmetric: circular convolution with a
                # zero-phase real kernel
                x._accumulate(np.fft.irfft(w.data * gspec, n=t, axis=-2))
            if w.requires_grad:
                weight = np.full(bins, 2.0)
                weight[0] = 1.0
                if t % 2 == 0:
                    weight[-1] = 1.0
                gw = (spectrum * np.conj(gspec)).real * weight[:, None] / t
                w._accumulate(_unbroadcast(gw, w.data.shape))

        out._backward = backward
    return out


def rfft(x, axis: Optional[int] = None) -> np.ndarray:
    """One-sided spectrum of a real signal.  Returns a plain complex array;
    the differentiable route through the FFT is spectral_filter."""
    arr = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("rfft: empty input")
    if axis is None:
        axis = 0 if arr.ndim == 1 else -2
    return np.fft.rfft(arr, axis=axis)


def irfft(spectrum: np.ndarray, t: int, axis: Optional[int] = None) -> np.ndarray:
    spectrum = np.asarray(spectrum)
    if axis is None:
        axis = 0 if spectrum.ndim == 1 else -2
    return np.fft.irfft(spectrum, n=t, axis=axis)


def attention(q, k, v) -> Tensor:
    """Scaled dot-product attention: softmax(q k^T / sqrt(d)) v."""
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    axes = tuple(range(k.data.ndim - 2)) + (k.data.ndim - 1, k.data.ndim - 2)
    scores = mul(matmul(q, transpose(k, axes)), 1.0 / np.sqrt(q.data.shape[-1]))
    return matmul(softmax(scores, axis=-1), v)


def cosine(a, b) -> Tensor:
    """Cosine similarity along the last axis.  Zero-norm rows are an error;
    callers that may see them must filter before calling."""
    a, b = as_tensor(a), as_tensor(b)
    na = np.linalg.norm(a.data, axis=-1)
    nb = np.linalg.norm(b.data, axis=-1)
    if np.any(na == 0.0) or np.any(nb == 0.0):
        raise ValueError("cosine: zero-norm vector")
    dot = (a.data * b.data).sum(axis=-1)
    c = dot / (na * nb)
    out = _result(c, (a, b), "cosine")
    if out.requires_grad:

        def backward():
            g = out.grad[..., None]
            if a.requires_grad:
                ga = g * (
                    b.data / (na * nb)[..., None]
                    - c[..., None] * a.data / (na * na)[..., None]
                )
                a._accumulate(_unbroadcast(ga, a.data.shape))
            if b.requires_grad:
                gb = g * (
                    a.data / (na * nb)[..., None]
                    - c[..., None] * b.data / (nb * nb)[..., None]
                )
                b._accumulate(_unbroadcast(gb, b.data.shape))

        out._backward = backward
    return out
