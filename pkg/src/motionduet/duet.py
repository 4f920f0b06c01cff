"""Dual-stream fusion block.

Text and video token streams are projected into a shared width by
bias-free linear maps (bias-free so an all-zero video stream stays
exactly zero), resampled to a common token count, and added.  The added
base is enhanced by three parallel branches (spectral magnitude filter,
depthwise temporal convolution, identity residual) while a per-token
hard selector picks whichever stream lies closer to the base.  The
selected stream and the enhanced base are concatenated and projected
back to the shared width.
"""

from __future__ import annotations

from typing import NamedTuple, Union

import numpy as np

from . import numkit as nk
from .numkit.tensor import Tensor, as_tensor

SELECT_CLOSER = "select_closer"
LITERAL_FARTHER = "literal_farther"
POLICIES = (SELECT_CLOSER, LITERAL_FARTHER)

ArrayLike = Union[np.ndarray, Tensor]


class DuetParams:
    """Learned pieces of the fusion block, sized for a fixed token count."""

    def __init__(
        self,
        text_dim: int,
        video_dim: int,
        hidden: int,
        tokens: int,
        conv_width: int = 3,
        seed: int = 0,
    ):
        if conv_width % 2 != 1:
            raise ValueError("conv width must be odd")
        rng = np.random.default_rng(seed)
        self.tokens = tokens
        self.hidden = hidden
        self.proj_text = nk.Param(
            "duet.proj_text", rng.normal(size=(text_dim, hidden)) / np.sqrt(text_dim)
        )
        self.proj_video = nk.Param(
            "duet.proj_video", rng.normal(size=(video_dim, hidden)) / np.sqrt(video_dim)
        )
        bins = tokens // 2 + 1
        # stored pre-activation; softplus keeps realized magnitudes > 0.
        # softplus(0.5413) ~ 1, so the branch starts near an identity filter
        self.filter_raw = nk.Param(
            "duet.filter_raw", np.full((bins, hidden), float(np.log(np.e - 1.0)))
        )
        self.conv_kernel = nk.Param(
            "duet.conv_kernel", rng.normal(size=(conv_width, hidden)) * 0.1
        )
        self.out_proj = nk.Param(
            "duet.out_proj", rng.normal(size=(2 * hidden, hidden)) / np.sqrt(2 * hidden)
        )

    def spectral_magnitudes(self) -> Tensor:
        """Realized nonnegative filter; differentiable w.r.t. the raw param."""
        return nk.softplus(self.filter_raw)


def resample_indices(src: int, dst: int) -> np.ndarray:
    """Nearest-index temporal resampling grid (ties round to even)."""
    if src < 1 or dst < 1:
        raise ValueError("token counts must be >= 1")
    if dst == 1:
        return np.zeros(1, dtype=int)
    return np.rint(np.arange(dst) * (src - 1) / (dst - 1)).astype(int)


class FusionBase(NamedTuple):
    text_stream: Tensor  # R_o: (..., L, D_h)
    video_stream: Tensor  # R_b: (..., L, D_h)
    fused: Tensor  # element-wise sum


def base_fusion(video: ArrayLike, text: ArrayLike, params: DuetParams) -> FusionBase:
    """Project both streams to the shared width and add them over a common
    token count L = max(N_t, N_v)."""
    video, text = as_tensor(video), as_tensor(text)
    if text.data.ndim < 2 or text.data.shape[-2] < 1:
        raise ValueError("text stream must have at least one token")
    if video.data.ndim != text.data.ndim:
        raise ValueError("video and text streams must have equal rank")
    n_t, n_v = text.data.shape[-2], video.data.shape[-2]
    target = max(n_t, n_v)
    text_stream = nk.take(
        nk.matmul(text, params.proj_text), resample_indices(n_t, target), axis=-2
    )
    video_stream = nk.take(
        nk.matmul(video, params.proj_video), resample_indices(n_v, target), axis=-2
    )
    return FusionBase(text_stream, video_stream, nk.add(text_stream, video_stream))


def fourier_branch(base: ArrayLike, magnitudes: ArrayLike) -> Tensor:
    """Filter the token sequence in the frequency domain.  Real nonnegative
    magnitudes leave every bin's phase untouched."""
    return nk.spectral_filter(as_tensor(base), as_tensor(magnitudes))


def _select_rows(mask: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Row-exact selection: output token l is a's token where mask[l], else
    b's.  The mask is frozen during backward; gradient flows only to the
    selected stream per token."""
    gate = mask[..., None]
    out = Tensor(
        np.where(gate, a.data, b.data),
        requires_grad=a.requires_grad or b.requires_grad,
    )
    if out.requires_grad:
        out._prev = (a, b)

        def backward():
            if a.requires_grad:
                a._accumulate(np.where(gate, out.grad, 0.0))
            if b.requires_grad:
                b._accumulate(np.where(gate, 0.0, out.grad))

        out._backward = backward
    return out


class DmmResult(NamedTuple):
    selected: Tensor  # (..., L, D_h)
    text_mask: np.ndarray  # (..., L) bool: True where the text stream won
    concat: Tensor  # [selected ; fused] on the feature axis


def dmm(
    base: FusionBase, policy: str = SELECT_CLOSER
) -> DmmResult:
    """Per-token hard selection between the two streams by Euclidean
    distance to the fused representation.

    select_closer keeps the closer stream (ties go to text, which is
    always present).  literal_farther keeps the farther stream; it exists
    for fidelity experiments and is not the default.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    d_text = np.linalg.norm(base.fused.data - base.text_stream.data, axis=-1)
    d_video = np.linalg.norm(base.fused.data - base.video_stream.data, axis=-1)
    if policy == SELECT_CLOSER:
        mask = d_text <= d_video
    else:
        mask = d_text > d_video
    selected = _select_rows(mask, base.text_stream, base.video_stream)
    return DmmResult(selected, mask, nk.concat([selected, base.fused], axis=-1))


def duet_forward(
    video: ArrayLike,
    text: ArrayLike,
    params: DuetParams,
    policy: str = SELECT_CLOSER,
) -> Tensor:
    """Full fusion: returns the context H of shape (..., L, D_h).

    The enhanced base is the sum of the base itself, the spectral branch,
    the convolution branch, and an identity residual of the base; the
    selected stream is concatenated with it and projected back down.
    """
    base = base_fusion(video, text, params)
    spectral = fourier_branch(base.fused, params.spectral_magnitudes())
    conv = nk.conv1d(base.fused, params.conv_kernel)
    enhanced = nk.add(nk.add(nk.add(base.fused, spectral), conv), base.fused)
    picked = dmm(base, policy)
    return nk.matmul(nk.concat([picked.selected, enhanced], axis=-1), params.out_proj)
