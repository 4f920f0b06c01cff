"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the numpy
reference implementation is the fallback.  Set MOTIONDUET_PURE_PYTHON=1
to force the fallback (read once, at import).
"""

import os

import numpy as np

from . import _ref

if os.environ.get("MOTIONDUET_PURE_PYTHON", "") not in ("", "0"):
    _backend = _ref
else:
    try:
        from . import _fast as _backend  # type: ignore[no-redef]
    except ImportError:
        _backend = _ref

BACKEND = _backend.NAME


def _check(x: np.ndarray, k: np.ndarray) -> None:
    if x.ndim != 3 or k.ndim != 2:
        raise ValueError("expected x of shape (B, T, D) and k of shape (K, D)")
    if k.shape[0] % 2 != 1:
        raise ValueError("kernel width must be odd")
    if k.shape[1] != x.shape[2]:
        raise ValueError("kernel channels must match input channels")


def _f64(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def conv1d_same_fwd(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    x, k = _f64(x), _f64(k)
    _check(x, k)
    return np.asarray(_backend.conv1d_same_fwd(x, k))


def conv1d_same_bwd(x: np.ndarray, k: np.ndarray, gy: np.ndarray):
    x, k, gy = _f64(x), _f64(k), _f64(gy)
    _check(x, k)
    if gy.shape != x.shape:
        raise ValueError("upstream gradient must match input shape")
    gx, gk = _backend.conv1d_same_bwd(x, k, gy)
    return np.asarray(gx), np.asarray(gk)
