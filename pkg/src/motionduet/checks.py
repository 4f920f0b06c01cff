"""Finite-difference verification of the trained gradient paths.

Six checks cover the places a broken gradient could hide: the two
alignment hinge losses and their sum, the spectral and temporal fusion
branches with respect to their filter and kernel weights, and the full
denoiser stack from noisy input to MSE.  Each check runs at ten or more
random points drawn clear of hinge kinks, in double precision, and
compares the reverse-mode gradient against central differences.

`fault` exists so the harness itself stays testable: it wraps one named
check's loss in an identity op whose backward flips the gradient sign,
which must make exactly that check fail.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import dash
from . import diffusion as df
from . import duet
from . import numkit as nk
from .numkit.tensor import Tensor

DEFAULT_TOL = 1e-5
DEFAULT_POINTS = 10

# margin distance every hinge argument must keep from its kink; central
# differences use step 1e-5, so 1e-3 leaves three orders of slack
_KINK_GUARD = 1e-3


@dataclass
class CheckResult:
    name: str
    points: int
    max_rel_err: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tol


def _flip_grad(t: Tensor) -> Tensor:
    """Identity forward, sign-flipped backward.  Only the fault-injection
    path uses this; a live network never should."""
    out = Tensor(t.data.copy(), requires_grad=t.requires_grad)
    if out.requires_grad:
        out._prev = (t,)

        def backward():
            t._accumulate(-out.grad)

        out._backward = backward
    return out


def _unit(a: np.ndarray) -> np.ndarray:
    return a / np.linalg.norm(a, axis=-1, keepdims=True)


def _draw_clear(
    rng,
    token_margin: Optional[float] = None,
    pair_margin: Optional[float] = None,
    n: int = 5,
    d: int = 6,
) -> tuple[np.ndarray, np.ndarray]:
    """Random (motion, video) token sets with every requested hinge argument
    at least _KINK_GUARD away from its kink."""
    for _ in range(200):
        z = rng.normal(size=(n, d))
        v = rng.normal(size=(n, d))
        zu, vu = _unit(z), _unit(v)
        if token_margin is not None:
            gap = 1.0 - token_margin - np.sum(zu * vu, axis=1)
            if np.abs(gap).min() <= _KINK_GUARD:
                continue
        if pair_margin is not None:
            gaps = np.abs(zu @ zu.T - vu @ vu.T)
            off = gaps[~np.eye(n, dtype=bool)]
            # both kink families: the hinge at the margin and |x| at zero
            if np.abs(off - pair_margin).min() <= _KINK_GUARD:
                continue
            if off.min() <= _KINK_GUARD:
                continue
        return z, v
    raise RuntimeError("could not draw a kink-clear point")


def _point_token_loss(rng, sabotage: bool) -> float:
    z, v = _draw_clear(rng, token_margin=0.2)

    def fn(leaf: Tensor) -> Tensor:
        loss = dash.token_margin_loss(dash.TokenPairs(leaf, v), 0.2).loss
        return _flip_grad(loss) if sabotage else loss

    return nk.gradcheck(fn, z)


def _point_pair_loss(rng, sabotage: bool) -> float:
    z, v = _draw_clear(rng, pair_margin=0.1)

    def fn(leaf: Tensor) -> Tensor:
        loss = dash.pair_structure_loss(dash.TokenPairs(leaf, v), 0.1).loss
        return _flip_grad(loss) if sabotage else loss

    return nk.gradcheck(fn, z)


def _point_dash_loss(rng, sabotage: bool) -> float:
    cfg = dash.DashConfig()
    z, v = _draw_clear(rng, token_margin=cfg.margin_token, pair_margin=cfg.margin_pair)

    def fn(leaf: Tensor) -> Tensor:
        loss = dash.dash_loss(dash.TokenPairs(leaf, v), cfg)
        return _flip_grad(loss) if sabotage else loss

    return nk.gradcheck(fn, z)


def _point_fourier_branch(rng, sabotage: bool) -> float:
    tokens, hidden = 6, 4
    base = rng.normal(size=(tokens, hidden))
    raw = rng.normal(size=(tokens // 2 + 1, hidden)) * 0.5

    def fn(leaf: Tensor) -> Tensor:
        out = duet.fourier_branch(base, nk.softplus(leaf))
        loss = nk.mean(nk.mul(out, out))
        return _flip_grad(loss) if sabotage else loss

    return nk.gradcheck(fn, raw)


def _point_conv_branch(rng, sabotage: bool) -> float:
    tokens, hidden = 6, 4
    base = rng.normal(size=(tokens, hidden))
    kernel = rng.normal(size=(3, hidden)) * 0.5

    def fn(leaf: Tensor) -> Tensor:
        out = nk.conv1d(base, leaf)
        loss = nk.mean(nk.mul(out, out))
        return _flip_grad(loss) if sabotage else loss

    return nk.gradcheck(fn, kernel)


def _point_denoiser_loss(rng, sabotage: bool) -> float:
    # gradient of the noise-matching MSE w.r.t. the input embedding, the
    # deepest parameter: it traverses every block, the final norm and head
    params = df.DenoiserParams(
        motion_dim=3,
        hidden=8,
        blocks=2,
        prefix_tokens=3,
        frames=6,
        steps=10,
        seed=int(rng.integers(0, 2**31)),
    )
    x_t = rng.normal(size=(6, 3))
    eps = rng.normal(size=(6, 3))
    h = rng.normal(size=(3, 8))
    t = int(rng.integers(1, 11))
    point = params.embed_w.data.copy()

    def fn(leaf: Tensor) -> Tensor:
        saved = params.embed_w
        params.embed_w = leaf
        try:
            pred = df.denoise(params, x_t, t, h)
            diff = nk.sub(pred, eps)
            loss = nk.mean(nk.mul(diff, diff))
        finally:
            params.embed_w = saved
        return _flip_grad(loss) if sabotage else loss

    return nk.gradcheck(fn, point)


_CHECKS: dict[str, Callable] = {
    "token_loss": _point_token_loss,
    "pair_loss": _point_pair_loss,
    "dash_loss": _point_dash_loss,
    "fourier_branch": _point_fourier_branch,
    "conv_branch": _point_conv_branch,
    "denoiser_loss": _point_denoiser_loss,
}

CHECK_NAMES = tuple(_CHECKS)


def run_check(
    name: str,
    points: int = DEFAULT_POINTS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    sabotage: bool = False,
) -> CheckResult:
    if name not in _CHECKS:
        raise ValueError(f"unknown check {name!r}; expected one of {CHECK_NAMES}")
    if points < 1:
        raise ValueError("need at least one point")
    point_fn = _CHECKS[name]
    slot = CHECK_NAMES.index(name)
    worst = 0.0
    for i in range(points):
        rng = np.random.default_rng((seed, slot, i))
        worst = max(worst, point_fn(rng, sabotage))
    return CheckResult(name=name, points=points, max_rel_err=worst, tol=tol)


def run_all(
    points: int = DEFAULT_POINTS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    fault: Optional[str] = None,
) -> list[CheckResult]:
    if fault is not None and fault not in _CHECKS:
        raise ValueError(f"unknown fault target {fault!r}; expected one of {CHECK_NAMES}")
    return [
        run_check(name, points=points, tol=tol, seed=seed, sabotage=(name == fault))
        for name in CHECK_NAMES
    ]


def format_report(results: list[CheckResult], elapsed: Optional[float] = None) -> str:
    width = max(len(r.name) for r in results)
    lines = [
        f"{r.name:<{width}}  points={r.points}  max_rel_err={r.max_rel_err:.3e}  "
        f"tol={r.tol:.0e}  {'PASS' if r.passed else 'FAIL'}"
        for r in results
    ]
    failed = [r.name for r in results if not r.passed]
    if failed:
        lines.append(f"FAILED: {', '.join(failed)}")
    else:
        lines.append("all gradient checks passed")
    if elapsed is not None:
        lines.append(f"elapsed: {elapsed:.2f} s")
    return "\n".join(lines)


def main_suite(seed: int = 0, fault: Optional[str] = None) -> tuple[str, bool]:
    """Run everything, timed; returns (report text, all passed)."""
    start = time.perf_counter()
    results = run_all(seed=seed, fault=fault)
    elapsed = time.perf_counter() - start
    return format_report(results, elapsed), all(r.passed for r in results)
