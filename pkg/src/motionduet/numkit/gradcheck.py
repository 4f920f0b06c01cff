"""Finite-difference validation of backward passes."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor


def gradcheck(fn: Callable[[Tensor], Tensor], point, step: float = 1e-5) -> float:
    """Compare the analytic gradient of a scalar-valued fn against central
    differences at `point`.

    Returns max over coordinates of |analytic - numeric| / max(1, |numeric|).
    fn must be pure and smooth near the point; step must lie in (0, 1e-2].
    """
    if not (0.0 < step <= 1e-2):
        raise ValueError("step must lie in (0, 1e-2]")
    base = np.array(point.data if isinstance(point, Tensor) else point, dtype=np.float64)

    def evaluate(values: np.ndarray) -> float:
        out = fn(Tensor(values))
        if out.data.size != 1:
            raise ValueError("fn must return a scalar")
        val = float(out.data)
        if not np.isfinite(val):
            raise FloatingPointError("gradcheck: fn returned a non-finite value")
        return val

    leaf = Tensor(base.copy(), requires_grad=True)
    out = fn(leaf)
    if out.data.size != 1:
        raise ValueError("fn must return a scalar")
    if not np.isfinite(float(out.data)):
        raise FloatingPointError("gradcheck: fn returned a non-finite value")
    out.backward()
    analytic = (
        np.zeros_like(base) if leaf.grad is None else leaf.grad.reshape(-1).copy()
    )

    flat = base.reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + step
        plus = evaluate(base)
        flat[i] = saved - step
        minus = evaluate(base)
        flat[i] = saved
        numeric = (plus - minus) / (2.0 * step)
        err = abs(analytic.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
        worst = max(worst, err)
    return worst
