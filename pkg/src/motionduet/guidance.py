"""Sampling-time guidance: prediction combinators and context perturbations.

The auto mode runs one denoiser twice, on the clean fused context and on
a degraded copy, then extrapolates away from the degraded prediction.
The degradation is feature dropout (no survivor rescaling; the weak
branch is meant to be biased) or additive Gaussian noise.  Both are pure
functions of (seed, shape, strength), so reusing one seed across all
timesteps of a trajectory keeps the degradation fixed for that whole
trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np

MODE_NONE = "none"
MODE_DUAL = "dual_cfg"
MODE_FUSED = "fused_cfg"
MODE_AUTO = "auto"
MODES = (MODE_NONE, MODE_DUAL, MODE_FUSED, MODE_AUTO)

KIND_DROPOUT = "dropout"
KIND_GAUSSIAN = "gaussian"
KINDS = (KIND_DROPOUT, KIND_GAUSSIAN)


@dataclass
class Perturbation:
    kind: str = KIND_DROPOUT
    strength: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.kind == KIND_DROPOUT and not 0.0 <= self.strength <= 1.0:
            raise ValueError("dropout strength must lie in [0, 1]")
        if self.kind == KIND_GAUSSIAN and self.strength < 0.0:
            raise ValueError("gaussian strength must be >= 0")


@dataclass
class GuidanceSpec:
    mode: str = MODE_NONE
    omega: float = 1.25
    omega_video: float = 0.5
    omega_text: float = 0.5
    perturbation: Optional[Perturbation] = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown guidance mode {self.mode!r}")
        if self.omega < 0:
            raise ValueError("omega must be >= 0")
        if self.mode == MODE_AUTO and self.perturbation is None:
            raise ValueError("auto guidance needs a perturbation")


def perturb(context: np.ndarray, p: Perturbation) -> np.ndarray:
    """Degrade a context array.  Never mutates the input; strength 0 is the
    identity bit for bit."""
    context = np.asarray(context)
    if p.strength == 0.0:
        return context.copy()
    rng = np.random.default_rng(p.seed)
    if p.kind == KIND_DROPOUT:
        keep = rng.random(context.shape) >= p.strength
        return np.where(keep, context, 0.0)
    return context + p.strength * rng.standard_normal(context.shape)


def auto_guide(strong: np.ndarray, weak: np.ndarray, omega: float) -> np.ndarray:
    """strong + omega * (strong - weak).

    Algebraically identical to (1 + omega) * strong - omega * weak, but this
    arrangement collapses exactly to `strong` when the predictions agree.
    """
    strong, weak = np.asarray(strong), np.asarray(weak)
    if strong.shape != weak.shape:
        raise ValueError("strong and weak predictions must share a shape")
    return strong + omega * (strong - weak)


def cfg_dual(
    cond_video: np.ndarray, cond_text: np.ndarray, omega_video: float, omega_text: float
) -> np.ndarray:
    """Weighted sum of per-modality conditional predictions."""
    cond_video, cond_text = np.asarray(cond_video), np.asarray(cond_text)
    if cond_video.shape != cond_text.shape:
        raise ValueError("conditional predictions must share a shape")
    return omega_video * cond_video + omega_text * cond_text


def cfg_fused(cond: np.ndarray, uncond: np.ndarray, omega: float) -> np.ndarray:
    """(1 + omega) * cond - omega * uncond, arranged as cond + omega * (cond
    - uncond) so agreeing predictions collapse exactly to cond."""
    cond, uncond = np.asarray(cond), np.asarray(uncond)
    if cond.shape != uncond.shape:
        raise ValueError("conditional and unconditional predictions must share a shape")
    return cond + omega * (cond - uncond)


Denoiser = Callable[[np.ndarray, int, np.ndarray], np.ndarray]


def guided_prediction(
    denoiser: Denoiser,
    x_t: np.ndarray,
    t: int,
    h_clean: np.ndarray,
    spec: GuidanceSpec,
    contexts: Optional[Mapping[str, np.ndarray]] = None,
) -> np.ndarray:
    """One guided denoiser evaluation.

    none: single pass on the clean context.
    auto: second pass on a perturbed copy, extrapolate.
    fused_cfg: second pass on an all-zero context, extrapolate.
    dual_cfg: per-modality contexts provided by the caller under the keys
    "video" and "text", combined with the two omega weights.
    """
    if spec.mode == MODE_NONE:
        return denoiser(x_t, t, h_clean)
    if spec.mode == MODE_AUTO:
        strong = denoiser(x_t, t, h_clean)
        weak = denoiser(x_t, t, perturb(h_clean, spec.perturbation))
        return auto_guide(strong, weak, spec.omega)
    if spec.mode == MODE_FUSED:
        cond = denoiser(x_t, t, h_clean)
        uncond = denoiser(x_t, t, np.zeros_like(h_clean))
        return cfg_fused(cond, uncond, spec.omega)
    if contexts is None or "video" not in contexts or "text" not in contexts:
        raise ValueError("dual_cfg needs per-modality contexts under 'video'/'text'")
    cond_video = denoiser(x_t, t, np.asarray(contexts["video"]))
    cond_text = denoiser(x_t, t, np.asarray(contexts["text"]))
    return cfg_dual(cond_video, cond_text, spec.omega_video, spec.omega_text)
