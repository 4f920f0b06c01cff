"""Toy latent diffusion over motion features.

The latent map is the identity: per-dimension normalized (T, D) motion
features are the latents.  A linear-beta schedule corrupts them, a small
prefix-conditioned attention denoiser predicts the added noise, and
ancestral sampling walks the chain back down with every prediction routed
through the guidance combinators.  The fused context H enters the
denoiser as prefix tokens, so text-only and text+video conditioning share
one forward path; an absent video stream is materialized as zeros before
fusion.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, TextIO

import numpy as np

from . import duet, numkit as nk
from .dash import DashConfig, dash_loss_many, pair_tokens, total_loss
from .guidance import GuidanceSpec, guided_prediction
from .numkit import Param, Tensor
from .synthdata import ConditionBundle, MotionSequence


class Schedule:
    """Linear-beta corruption schedule, indexed by t in [1, steps]."""

    def __init__(self, steps: int = 100, beta_start: float = 1e-4, beta_end: float = 2e-2):
        if steps < 1:
            raise ValueError("schedule needs at least one step")
        if not 0.0 < beta_start <= beta_end < 1.0:
            raise ValueError("betas must satisfy 0 < start <= end < 1")
        self.steps = steps
        self.betas = np.linspace(beta_start, beta_end, steps)
        self.alphas = 1.0 - self.betas
        self.alpha_bars = np.cumprod(self.alphas)
        if not np.all(np.diff(self.alpha_bars) < 0.0) and steps > 1:
            raise AssertionError("alpha_bar must decrease strictly")

    def _check_t(self, t: int) -> int:
        t = int(t)
        if not 1 <= t <= self.steps:
            raise ValueError(f"t must lie in [1, {self.steps}], got {t}")
        return t

    def beta(self, t: int) -> float:
        return float(self.betas[self._check_t(t) - 1])

    def alpha(self, t: int) -> float:
        return float(self.alphas[self._check_t(t) - 1])

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bars[self._check_t(t) - 1])


def forward_diffuse(
    x0: np.ndarray, t: int, sched: Schedule, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Corrupt x0 to noise level t: x_t = sqrt(ab)*x0 + sqrt(1-ab)*eps."""
    x0 = np.asarray(x0, dtype=np.float64)
    ab = sched.alpha_bar(t)
    eps = np.random.default_rng(seed).standard_normal(x0.shape)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps, eps


@dataclass
class NormStats:
    """Per-dimension affine normalization fitted on the training corpus."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("mean and std must be matching 1-D arrays")
        if np.any(self.std <= 0.0):
            raise ValueError("std must be positive")

    @classmethod
    def fit(cls, values: Sequence[np.ndarray]) -> "NormStats":
        flat = np.concatenate([np.asarray(v, dtype=np.float64) for v in values], axis=0)
        # floor keeps constant dimensions from exploding under encode
        return cls(flat.mean(axis=0), np.maximum(flat.std(axis=0), 1e-6))

    def encode(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def decode(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.std + self.mean


class DenoiserParams:
    """Weights of the prefix-conditioned attention denoiser.

    Layout: token embedding D -> D_h, learned positions over prefix+motion
    tokens, a per-step embedding table added to every token, `blocks`
    pre-LN single-head attention blocks with a gelu MLP, and a linear head
    back to D on the motion tokens only.
    """

    def __init__(
        self,
        motion_dim: int = 8,
        hidden: int = 32,
        blocks: int = 4,
        prefix_tokens: int = 16,
        frames: int = 64,
        steps: int = 100,
        seed: int = 0,
    ):
        if min(motion_dim, hidden, blocks, prefix_tokens, frames, steps) < 1:
            raise ValueError("all denoiser sizes must be positive")
        rng = np.random.default_rng(seed)
        self.motion_dim = motion_dim
        self.hidden = hidden
        self.n_blocks = blocks
        self.prefix_tokens = prefix_tokens
        self.frames = frames
        self.steps = steps
        mlp = 2 * hidden

        def normal(name, shape, scale):
            return Param(name, rng.normal(size=shape) * scale)

        def const(name, value):
            return Param(name, value)

        self.embed_w = normal("denoiser.embed_w", (motion_dim, hidden), 1.0 / np.sqrt(motion_dim))
        self.embed_b = const("denoiser.embed_b", np.zeros(hidden))
        self.pos = normal("denoiser.pos", (prefix_tokens + frames, hidden), 0.02)
        self.t_table = normal("denoiser.t_table", (steps, hidden), 0.02)
        self.blocks = []
        for i in range(blocks):
            pre = f"denoiser.block{i}."
            self.blocks.append(
                {
                    "ln1_g": const(pre + "ln1_g", np.ones(hidden)),
                    "ln1_b": const(pre + "ln1_b", np.zeros(hidden)),
                    "wq": normal(pre + "wq", (hidden, hidden), 1.0 / np.sqrt(hidden)),
                    "wk": normal(pre + "wk", (hidden, hidden), 1.0 / np.sqrt(hidden)),
                    "wv": normal(pre + "wv", (hidden, hidden), 1.0 / np.sqrt(hidden)),
                    "wo": normal(pre + "wo", (hidden, hidden), 0.1 / np.sqrt(hidden)),
                    "ln2_g": const(pre + "ln2_g", np.ones(hidden)),
                    "ln2_b": const(pre + "ln2_b", np.zeros(hidden)),
                    "w1": normal(pre + "w1", (hidden, mlp), 1.0 / np.sqrt(hidden)),
                    "b1": const(pre + "b1", np.zeros(mlp)),
                    "w2": normal(pre + "w2", (mlp, hidden), 0.1 / np.sqrt(mlp)),
                    "b2": const(pre + "b2", np.zeros(hidden)),
                }
            )
        self.ln_f_g = const("denoiser.ln_f_g", np.ones(hidden))
        self.ln_f_b = const("denoiser.ln_f_b", np.zeros(hidden))
        self.head_w = normal("denoiser.head_w", (hidden, motion_dim), 1.0 / np.sqrt(hidden))
        self.head_b = const("denoiser.head_b", np.zeros(motion_dim))


def _promote(x, ndim_target: int):
    arr = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if arr.ndim == ndim_target - 1:
        return nk.reshape(x, (1,) + arr.shape), True
    if arr.ndim == ndim_target:
        return x if isinstance(x, Tensor) else Tensor(arr), False
    raise ValueError(f"expected {ndim_target - 1}-D or {ndim_target}-D input, got {arr.ndim}-D")


def _forward(
    params: DenoiserParams,
    x_t,
    t,
    h,
    hidden_layer: Optional[int] = None,
) -> tuple[Tensor, Optional[Tensor], bool]:
    x3, squeezed = _promote(x_t, 3)
    h3, _ = _promote(h, 3)
    batch, frames, dim = x3.data.shape
    if (frames, dim) != (params.frames, params.motion_dim):
        raise ValueError(
            f"denoiser is sized for ({params.frames}, {params.motion_dim}) motion tokens,"
            f" got ({frames}, {dim})"
        )
    if h3.data.shape[-2:] != (params.prefix_tokens, params.hidden):
        raise ValueError(
            f"context must be (.., {params.prefix_tokens}, {params.hidden}),"
            f" got {h3.data.shape}"
        )
    if h3.data.shape[0] == 1 and batch > 1:
        h3 = nk.concat([h3] * batch, axis=0)
    if h3.data.shape[0] != batch:
        raise ValueError("context batch does not match input batch")

    t_idx = np.asarray(t if np.ndim(t) else [int(t)] * batch)
    if t_idx.shape != (batch,):
        raise ValueError("t must be a scalar or one step index per sample")
    if t_idx.min() < 1 or t_idx.max() > params.steps:
        raise ValueError(f"t must lie in [1, {params.steps}]")

    tokens = nk.add(nk.matmul(x3, params.embed_w), params.embed_b)
    seq = nk.concat([h3, tokens], axis=-2)
    seq = nk.add(seq, params.pos)
    temb = nk.take(params.t_table, t_idx - 1, axis=0)
    seq = nk.add(seq, nk.reshape(temb, (batch, 1, params.hidden)))

    prefix = params.prefix_tokens
    motion_cols = np.arange(prefix, prefix + frames)
    hidden = None
    if hidden_layer == 0:
        hidden = nk.take(seq, motion_cols, axis=1)
    for i, blk in enumerate(params.blocks):
        normed = nk.layer_norm(seq, blk["ln1_g"], blk["ln1_b"])
        attended = nk.attention(
            nk.matmul(normed, blk["wq"]),
            nk.matmul(normed, blk["wk"]),
            nk.matmul(normed, blk["wv"]),
        )
        seq = nk.add(seq, nk.matmul(attended, blk["wo"]))
        normed = nk.layer_norm(seq, blk["ln2_g"], blk["ln2_b"])
        inner = nk.gelu(nk.add(nk.matmul(normed, blk["w1"]), blk["b1"]))
        seq = nk.add(seq, nk.add(nk.matmul(inner, blk["w2"]), blk["b2"]))
        if hidden_layer == i + 1:
            hidden = nk.take(seq, motion_cols, axis=1)

    final = nk.layer_norm(seq, params.ln_f_g, params.ln_f_b)
    motion = nk.take(final, motion_cols, axis=1)
    pred = nk.add(nk.matmul(motion, params.head_w), params.head_b)
    return pred, hidden, squeezed


def denoise(params: DenoiserParams, x_t, t, h) -> Tensor:
    """Noise prediction for x_t at step t under prefix context h.

    x_t: (T, D) or (B, T, D); h: (L, D_h) or (B, L, D_h); t: scalar step
    or one step per sample.  A 2-D x_t returns a 2-D prediction.
    """
    pred, _, squeezed = _forward(params, x_t, t, h)
    if squeezed:
        return nk.reshape(pred, pred.data.shape[1:])
    return pred


def denoise_with_hidden(
    params: DenoiserParams, x_t, t, h, layer: int
) -> tuple[Tensor, Tensor]:
    """Like denoise, but also returns the motion-token hidden states after
    `layer` completed blocks (0 = the embedded input)."""
    if not 0 <= layer <= params.n_blocks:
        raise ValueError(f"layer must lie in [0, {params.n_blocks}]")
    pred, hidden, _ = _forward(params, x_t, t, h, hidden_layer=layer)
    return pred, hidden


class Model:
    """One training run's learnable state plus its frozen companions."""

    def __init__(
        self,
        motion_dim: int = 8,
        frames: int = 64,
        hidden: int = 32,
        blocks: int = 4,
        text_dim: int = 8,
        text_tokens: int = 4,
        video_dim: int = 8,
        video_tokens: int = 16,
        steps: int = 100,
        target: str = "eps",
        conv_width: int = 3,
        beta_start: float = 1e-4,
        beta_end: float = 2e-2,
        seed: int = 0,
    ):
        if target not in ("eps", "x0"):
            raise ValueError("target must be 'eps' (predict noise) or 'x0' (predict clean)")
        prefix = max(text_tokens, video_tokens)
        self.motion_dim = motion_dim
        self.frames = frames
        self.video_dim = video_dim
        self.video_tokens = video_tokens
        self.target = target
        self.duet = duet.DuetParams(
            text_dim=text_dim,
            video_dim=video_dim,
            hidden=hidden,
            tokens=prefix,
            conv_width=conv_width,
            seed=seed + 1,
        )
        self.denoiser = DenoiserParams(
            motion_dim=motion_dim,
            hidden=hidden,
            blocks=blocks,
            prefix_tokens=prefix,
            frames=frames,
            steps=steps,
            seed=seed + 2,
        )
        rng = np.random.default_rng(seed + 3)
        self.adapter = Param(
            "dash.adapter", rng.normal(size=(hidden, video_dim)) / np.sqrt(hidden)
        )
        self.schedule = Schedule(steps, beta_start, beta_end)
        self.norm: Optional[NormStats] = None

    def context(self, bundle: ConditionBundle, policy: str = duet.SELECT_CLOSER) -> Tensor:
        """Fused prefix H for one bundle; absent video becomes zeros before
        fusion, so the fusion itself never branches on modality."""
        video = bundle.video_or_zeros(self.video_tokens, self.video_dim)
        return duet.duet_forward(video, bundle.text, self.duet, policy)

    def context_batch(
        self, bundles: Sequence[ConditionBundle], policy: str = duet.SELECT_CLOSER
    ) -> Tensor:
        """Fused prefixes for a batch in one graph; requires uniform token
        counts across the bundles (the synthetic corpus guarantees this)."""
        video = np.stack(
            [b.video_or_zeros(self.video_tokens, self.video_dim) for b in bundles]
        )
        text = np.stack([np.asarray(b.text, dtype=np.float64) for b in bundles])
        return duet.duet_forward(video, text, self.duet, policy)


class StepLosses(NamedTuple):
    l_mld: float
    l_dash: float
    l_total: float


def train_step(
    batch: Sequence[tuple[np.ndarray, ConditionBundle]],
    model: Model,
    cfg: DashConfig,
    opt: nk.Adam,
    seed: int = 0,
) -> StepLosses:
    """One optimizer step on a batch of (latent, bundle) pairs.

    Draws one diffusion step per sample, predicts the injected noise under
    the fused context, and adds the alignment loss on layer-`cfg.layer`
    motion hiddens for every sample that actually has video features.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    rng = np.random.default_rng(seed)
    sched = model.schedule
    x0 = np.stack([np.asarray(x, dtype=np.float64) for x, _ in batch])
    t_idx = rng.integers(1, sched.steps + 1, size=len(batch))
    eps = rng.standard_normal(x0.shape)
    ab = sched.alpha_bars[t_idx - 1][:, None, None]
    x_t = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps

    h = model.context_batch([bundle for _, bundle in batch])
    pred, hidden = denoise_with_hidden(model.denoiser, x_t, t_idx, h, cfg.layer)
    diff = nk.sub(pred, eps if model.target == "eps" else x0)
    l_mld = nk.mean(nk.mul(diff, diff))

    present = [i for i, (_, bundle) in enumerate(batch) if bundle.video is not None]
    if present:
        rows = nk.take(hidden, np.array(present), axis=0)
        videos = np.stack([batch[i][1].video for i in present])
        l_dash = dash_loss_many(pair_tokens(rows, videos, model.adapter), cfg)
    else:
        l_dash = Tensor(0.0)

    loss = total_loss(l_mld, l_dash, cfg.weight)
    opt.zero_grad()
    loss.backward()
    opt.step()
    return StepLosses(float(l_mld.data), float(l_dash.data), float(loss.data))


def train_loop(
    model: Model,
    dataset: Sequence[tuple[np.ndarray, ConditionBundle]],
    cfg: DashConfig,
    steps: int,
    batch_size: int = 32,
    lr: float = 1e-4,
    seed: int = 0,
    start_step: int = 0,
    opt: Optional[nk.Adam] = None,
    log_stream: Optional[TextIO] = None,
) -> list[StepLosses]:
    """Seed-deterministic training driver.

    Step s derives its rng from (seed, s), so a resumed run draws the same
    batches and noise it would have seen uninterrupted.  Emits one JSON
    line per step when log_stream is given.
    """
    if opt is None:
        opt = nk.Adam(nk.collect_params(model), lr=lr)
    history = []
    for s in range(start_step, start_step + steps):
        picker = np.random.default_rng((seed, s))
        idx = picker.choice(len(dataset), size=min(batch_size, len(dataset)), replace=False)
        batch = [dataset[i] for i in idx]
        step_seed = int(picker.integers(0, 2**63 - 1))
        try:
            losses = train_step(batch, model, cfg, opt, seed=step_seed)
        except FloatingPointError as err:
            raise FloatingPointError(f"training diverged at step {s}: {err}") from err
        history.append(losses)
        if log_stream is not None:
            record = {
                "step": s,
                "l_mld": losses.l_mld,
                "l_dash": losses.l_dash,
                "l_total": losses.l_total,
            }
            log_stream.write(json.dumps(record, sort_keys=True) + "\n")
    return history


def build_training_set(
    motions: Sequence[MotionSequence],
    text_map,
    video_map,
    norm: NormStats,
) -> list[tuple[np.ndarray, ConditionBundle]]:
    """Pair normalized latents with their condition bundles."""
    out = []
    for i, m in enumerate(motions):
        video = None if video_map is None else video_map(m)
        bundle = ConditionBundle(text=text_map(m.label), video=video, source_id=f"synth/{i}")
        out.append((norm.encode(m.values), bundle))
    return out


def sample_many(
    model: Model,
    bundles: Sequence[ConditionBundle],
    gspec: GuidanceSpec,
    seed: int = 0,
    policy: str = duet.SELECT_CLOSER,
) -> list[MotionSequence]:
    """Ancestral sampling, one trajectory per bundle, vectorized across the
    batch.  Every step's prediction goes through guided_prediction; the
    dual mode gets per-modality contexts built by zeroing the other
    stream."""
    if model.norm is None:
        raise ValueError("model has no normalization stats; train or load first")
    if not bundles:
        return []
    sched = model.schedule
    batch = len(bundles)
    h = model.context_batch(bundles, policy).data

    contexts = None
    if gspec.mode == "dual_cfg":
        video = np.stack(
            [b.video_or_zeros(model.video_tokens, model.video_dim) for b in bundles]
        )
        text = np.stack([np.asarray(b.text, dtype=np.float64) for b in bundles])
        contexts = {
            "video": duet.duet_forward(video, np.zeros_like(text), model.duet, policy).data,
            "text": duet.duet_forward(np.zeros_like(video), text, model.duet, policy).data,
        }

    def predict(x_t: np.ndarray, t: int, context: np.ndarray) -> np.ndarray:
        return denoise(model.denoiser, x_t, t, context).data

    rng = np.random.default_rng(seed)
    x = rng.standard_normal((batch, model.frames, model.motion_dim))
    for t in range(sched.steps, 0, -1):
        out = guided_prediction(predict, x, t, h, gspec, contexts)
        a, ab, b = sched.alpha(t), sched.alpha_bar(t), sched.beta(t)
        if model.target == "eps":
            x = (x - b / np.sqrt(1.0 - ab) * out) / np.sqrt(a)
        else:
            # posterior mean around the predicted clean latent
            ab_prev = sched.alpha_bar(t - 1) if t > 1 else 1.0
            x = (
                np.sqrt(ab_prev) * b * out + np.sqrt(a) * (1.0 - ab_prev) * x
            ) / (1.0 - ab)
        if t > 1:
            x = x + np.sqrt(b) * rng.standard_normal(x.shape)
    if not np.all(np.isfinite(x)):
        raise FloatingPointError("sampling produced non-finite values")
    return [MotionSequence(model.norm.decode(x[i])) for i in range(batch)]


def sample(
    model: Model,
    bundle: ConditionBundle,
    gspec: GuidanceSpec,
    seed: int = 0,
    policy: str = duet.SELECT_CLOSER,
) -> MotionSequence:
    """Single-trajectory convenience wrapper over sample_many."""
    return sample_many(model, [bundle], gspec, seed=seed, policy=policy)[0]
