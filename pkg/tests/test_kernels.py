import importlib
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motionduet import _kernels
from motionduet._kernels import _ref

try:
    from motionduet._kernels import _fast
except ImportError:  # pragma: no cover - compiled core should exist in CI
    _fast = None

needs_fast = pytest.mark.skipif(_fast is None, reason="compiled core not built")


def _case(seed, b=3, t=11, d=4, k=5):
    g = np.random.default_rng(seed)
    return g.normal(size=(b, t, d)), g.normal(size=(k, d))


@needs_fast
def test_backends_agree_on_forward():
    x, k = _case(0)
    a = _fast.conv1d_same_fwd(x, k)
    b = _ref.conv1d_same_fwd(x, k)
    assert np.abs(np.asarray(a) - b).max() <= 1e-12


@needs_fast
def test_backends_agree_on_backward():
    x, k = _case(1)
    gy = np.random.default_rng(2).normal(size=x.shape)
    gx_f, gk_f = _fast.conv1d_same_bwd(x, k, gy)
    gx_r, gk_r = _ref.conv1d_same_bwd(x, k, gy)
    assert np.abs(np.asarray(gx_f) - gx_r).max() <= 1e-12
    assert np.abs(np.asarray(gk_f) - gk_r).max() <= 1e-12


@needs_fast
@settings(max_examples=25, deadline=None)
@given(
    st.integers(min_value=1, max_value=4),
    st.integers(min_value=1, max_value=16),
    st.integers(min_value=1, max_value=6),
    st.sampled_from([1, 3, 5, 7]),
    st.integers(min_value=0, max_value=2**31 - 1),
)
def test_backends_agree_property(b, t, d, k, seed):
    g = np.random.default_rng(seed)
    x = g.normal(size=(b, t, d))
    kern = g.normal(size=(k, d))
    gy = g.normal(size=(b, t, d))
    assert np.allclose(_fast.conv1d_same_fwd(x, kern), _ref.conv1d_same_fwd(x, kern), atol=1e-12)
    gx_f, gk_f = _fast.conv1d_same_bwd(x, kern, gy)
    gx_r, gk_r = _ref.conv1d_same_bwd(x, kern, gy)
    assert np.allclose(gx_f, gx_r, atol=1e-12)
    assert np.allclose(gk_f, gk_r, atol=1e-12)


def test_reference_backward_matches_finite_differences():
    # independent check of the reference kernels themselves
    x, k = _case(3, b=1, t=6, d=2, k=3)
    gy = np.random.default_rng(4).normal(size=x.shape)
    gx, gk = _ref.conv1d_same_bwd(x, k, gy)
    step = 1e-6

    def loss(xv, kv):
        return float((_ref.conv1d_same_fwd(xv, kv) * gy).sum())

    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += step
        xm[idx] -= step
        num = (loss(xp, k) - loss(xm, k)) / (2 * step)
        assert abs(gx[idx] - num) <= 1e-6
    for idx in np.ndindex(k.shape):
        kp, km = k.copy(), k.copy()
        kp[idx] += step
        km[idx] -= step
        num = (loss(x, kp) - loss(x, km)) / (2 * step)
        assert abs(gk[idx] - num) <= 1e-6


def test_dispatcher_validates_shapes():
    with pytest.raises(ValueError):
        _kernels.conv1d_same_fwd(np.zeros((4, 3)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        _kernels.conv1d_same_fwd(np.zeros((1, 4, 3)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        _kernels.conv1d_same_fwd(np.zeros((1, 4, 3)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        _kernels.conv1d_same_bwd(np.zeros((1, 4, 3)), np.zeros((3, 3)), np.zeros((1, 5, 3)))


def test_env_var_forces_python_backend():
    env = dict(os.environ, MOTIONDUET_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from motionduet import _kernels; print(_kernels.BACKEND)"],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    assert out.stdout.strip() == "python"


def test_default_backend_reported():
    assert _kernels.BACKEND in ("compiled", "python")
    if _fast is not None:
        assert _kernels.BACKEND == "compiled"
