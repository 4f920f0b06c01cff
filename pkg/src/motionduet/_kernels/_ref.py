"""Pure numpy kernels: depthwise temporal cross-correlation, "same" padding.

Shapes: x is (B, T, D), k is (K, D) with K odd.  Channel d of the output
depends only on channel d of the input, filtered along the time axis with
zero padding of (K - 1) // 2 frames on each side.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NAME = "python"


def _padded(x: np.ndarray, pad: int) -> np.ndarray:
    b, t, d = x.shape
    out = np.zeros((b, t + 2 * pad, d), dtype=x.dtype)
    out[:, pad : pad + t, :] = x
    return out


def conv1d_same_fwd(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    pad = (k.shape[0] - 1) // 2
    # windows[b, t, d, j] == padded x at time t + j
    windows = sliding_window_view(_padded(x, pad), k.shape[0], axis=1)
    return np.einsum("btdj,jd->btd", windows, k)


def conv1d_same_bwd(x: np.ndarray, k: np.ndarray, gy: np.ndarray):
    pad = (k.shape[0] - 1) // 2
    gy_windows = sliding_window_view(_padded(gy, pad), k.shape[0], axis=1)
    gx = np.einsum("btdj,jd->btd", gy_windows, k[::-1])
    x_windows = sliding_window_view(_padded(x, pad), k.shape[0], axis=1)
    gk = np.einsum("btdj,btd->jd", x_windows, gy)
    return gx, gk
