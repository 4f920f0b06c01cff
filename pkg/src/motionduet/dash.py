"""Alignment losses between predicted motion tokens and video reference
tokens.

Two pieces, summed with unit weights:

- token loss: mean over pairs of ReLU(1 - margin - cos(z_i, v_i)); pulls
  each motion token toward its video reference up to a margin
- structure loss: mean over all (i, j) pairs, including i = j, of
  ReLU(|cos(z_i, z_j) - cos(v_i, v_j)| - margin); matches the pairwise
  similarity structure of the references

Video tokens are frozen references: gradients flow only into the motion
side.  Zero-norm tokens (either side) are excluded pair-wise and the
means renormalize over what is left; an all-excluded batch contributes
zero.  Kink subgradients are fixed at 0 (ReLU at 0, |x| at 0).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from . import numkit as nk
from .duet import resample_indices
from .numkit.tensor import Tensor, as_tensor

log = logging.getLogger(__name__)


@dataclass
class DashConfig:
    margin_token: float = 0.2
    margin_pair: float = 0.1
    weight: float = 0.1
    layer: int = 2

    def __post_init__(self):
        if not 0 <= self.margin_token < 1 or not 0 <= self.margin_pair < 1:
            raise ValueError("margins must lie in [0, 1)")
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ValueError("weight must be finite and >= 0")
        if self.layer < 0:
            raise ValueError("layer index must be >= 0")


class TokenPairs(NamedTuple):
    """Temporally aligned (motion token, video reference) rows of equal
    width; index i on both sides covers the same temporal segment."""

    motion: Tensor  # (N, D_a), carries gradients
    video: np.ndarray  # (N, D_a), frozen


def pair_tokens(
    motion_tokens: Union[Tensor, np.ndarray],
    video_tokens: np.ndarray,
    adapter: Tensor,
) -> TokenPairs:
    """Bridge widths and token counts: motion tokens go through the learned
    adapter into the video width; video tokens are nearest-resampled to the
    motion token count and stay frozen."""
    motion_tokens = as_tensor(motion_tokens)
    video_tokens = np.asarray(video_tokens, dtype=np.float64)
    adapted = nk.matmul(motion_tokens, adapter)
    idx = resample_indices(video_tokens.shape[-2], motion_tokens.data.shape[-2])
    return TokenPairs(adapted, np.take(video_tokens, idx, axis=-2))


class LossWithSkips(NamedTuple):
    loss: Tensor
    skipped: int


def _valid_rows(z: np.ndarray, v: np.ndarray) -> np.ndarray:
    return (np.linalg.norm(z, axis=-1) > 0.0) & (np.linalg.norm(v, axis=-1) > 0.0)


def token_margin_loss(pairs: TokenPairs, margin: float) -> LossWithSkips:
    """Mean of ReLU(1 - margin - cos(z_i, v_i)) over pairs with nonzero
    norms on both sides."""
    z, v = pairs.motion, np.asarray(pairs.video, dtype=np.float64)
    if z.data.shape != v.shape:
        raise ValueError("motion and video token blocks must share a shape")
    valid = _valid_rows(z.data, v)
    skipped = int((~valid).sum())
    if skipped:
        log.warning("token loss: skipped %d zero-norm pair(s)", skipped)
    if not valid.any():
        return LossWithSkips(Tensor(0.0), skipped)
    idx = np.flatnonzero(valid)
    cos = nk.cosine(nk.take(z, idx, axis=0), Tensor(v[idx]))
    per_pair = nk.relu(nk.sub(1.0 - margin, cos))
    return LossWithSkips(nk.mul(nk.sum_(per_pair), 1.0 / idx.size), skipped)


def pair_structure_loss(pairs: TokenPairs, margin: float) -> LossWithSkips:
    """Mean of ReLU(|cos(z_i, z_j) - cos(v_i, v_j)| - margin) over the full
    pair grid of nonzero-norm tokens, i = j included (it contributes 0)."""
    z, v = pairs.motion, np.asarray(pairs.video, dtype=np.float64)
    if z.data.shape != v.shape:
        raise ValueError("motion and video token blocks must share a shape")
    valid = _valid_rows(z.data, v)
    skipped = int((~valid).sum())
    if skipped:
        log.warning("structure loss: skipped %d zero-norm token(s)", skipped)
    n = int(valid.sum())
    if n < 2:
        if n < z.data.shape[0]:
            log.warning("structure loss: fewer than 2 usable tokens, returning 0")
        return LossWithSkips(Tensor(0.0), skipped)
    idx = np.flatnonzero(valid)
    z_sel = nk.take(z, idx, axis=0)
    d = z.data.shape[-1]
    cos_z = nk.cosine(nk.reshape(z_sel, (n, 1, d)), nk.reshape(z_sel, (1, n, d)))
    v_sel = v[idx]
    v_unit = v_sel / np.linalg.norm(v_sel, axis=-1, keepdims=True)
    cos_v = v_unit @ v_unit.T
    gap = nk.sub(nk.abs_(nk.sub(cos_z, Tensor(cos_v))), margin)
    return LossWithSkips(nk.mul(nk.sum_(nk.relu(gap)), 1.0 / (n * n)), skipped)


def dash_loss(pairs: TokenPairs, cfg: DashConfig) -> Tensor:
    """Unit-weight sum of the token and structure losses."""
    token = token_margin_loss(pairs, cfg.margin_token).loss
    structure = pair_structure_loss(pairs, cfg.margin_pair).loss
    return nk.add(token, structure)


def dash_loss_many(pairs: TokenPairs, cfg: DashConfig) -> Tensor:
    """dash_loss over a (B, N, D) stack of token sets, averaged across B.

    When every token in the stack is usable, one vectorized graph computes
    the flat mean, which equals the average of per-set losses because the
    sets share a size.  Any zero-norm token drops to the per-set path so
    skip handling stays byte-for-byte the per-set behavior.
    """
    z, v = pairs.motion, np.asarray(pairs.video, dtype=np.float64)
    if z.data.ndim != 3 or z.data.shape != v.shape:
        raise ValueError("expected matching (B, N, D) token blocks")
    b, n, d = z.data.shape
    if n < 2 or not _valid_rows(z.data, v).all():
        total = None
        for i in range(b):
            rows = nk.reshape(nk.take(z, np.array([i]), axis=0), (n, d))
            term = dash_loss(TokenPairs(rows, v[i]), cfg)
            total = term if total is None else nk.add(total, term)
        return nk.mul(total, 1.0 / b)
    cos_t = nk.cosine(z, Tensor(v))
    token = nk.mul(nk.sum_(nk.relu(nk.sub(1.0 - cfg.margin_token, cos_t))), 1.0 / (b * n))
    cos_z = nk.cosine(nk.reshape(z, (b, n, 1, d)), nk.reshape(z, (b, 1, n, d)))
    v_unit = v / np.linalg.norm(v, axis=-1, keepdims=True)
    cos_v = np.einsum("bid,bjd->bij", v_unit, v_unit)
    gap = nk.sub(nk.abs_(nk.sub(cos_z, Tensor(cos_v))), cfg.margin_pair)
    structure = nk.mul(nk.sum_(nk.relu(gap)), 1.0 / (b * n * n))
    return nk.add(token, structure)


def total_loss(
    reconstruction: Union[Tensor, float],
    alignment: Union[Tensor, float],
    weight: float,
) -> Tensor:
    """Training objective: reconstruction + weight * alignment."""
    reconstruction, alignment = as_tensor(reconstruction), as_tensor(alignment)
    if not np.isfinite(reconstruction.data).all() or not np.isfinite(alignment.data).all():
        raise FloatingPointError("non-finite loss term")
    return nk.add(reconstruction, nk.mul(alignment, float(weight)))
