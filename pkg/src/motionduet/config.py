"""One JSON document that pins every knob of an experiment.

A ``RunConfig`` groups the knobs into sections (data, duet, dash,
guidance, diffusion, metrics, clean) plus a single top-level seed.
Every key has a default, so an empty document ``{}`` is a valid, fully
reproducible run.  Unknown keys are rejected loudly instead of being
ignored: a typo in a sweep script should fail the run, not silently
fall back to a default.

The build_* helpers are the one place that decides how section values
and the master seed map onto constructor arguments, so the CLI, tests
and notebooks all assemble identical objects from the same document.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Any, Optional

from . import diffusion, duet, guidance, metrics, poseclean, synthdata
from .dash import DashConfig
from .metrics import MetricsConfig
from .poseclean import CleanConfig

ENV_CONFIG_PATH = "MOTIONDUET_CONFIG"


class ConfigError(ValueError):
    """Malformed or contradictory configuration document."""


@dataclass
class DataConfig:
    """Synthetic corpus shape and the frozen condition-feature maps."""

    classes: int = 4
    frames: int = 64
    dims: int = 8
    harmonics: int = 3
    noise: float = 0.1
    per_class: int = 32
    text_tokens: int = 4
    text_dim: int = 8
    video_dim: int = 8

    def __post_init__(self):
        if min(self.classes, self.frames, self.dims, self.per_class) < 1:
            raise ValueError("corpus sizes must be positive")
        if min(self.harmonics, self.text_tokens, self.text_dim, self.video_dim) < 1:
            raise ValueError("feature sizes must be positive")
        if self.noise < 0:
            raise ValueError("noise level must be >= 0")


@dataclass
class DuetConfig:
    hidden: int = 32
    conv_width: int = 3
    policy: str = duet.SELECT_CLOSER

    def __post_init__(self):
        if self.hidden < 1:
            raise ValueError("hidden width must be positive")
        if self.conv_width < 1 or self.conv_width % 2 != 1:
            raise ValueError("conv width must be a positive odd integer")
        if self.policy not in duet.POLICIES:
            raise ValueError(
                f"unknown policy {self.policy!r}; expected one of {duet.POLICIES}"
            )


@dataclass
class GuidanceConfig:
    """Flat, JSON-friendly face of GuidanceSpec; to_spec() assembles the
    nested perturbation object auto mode needs."""

    mode: str = guidance.MODE_AUTO
    omega: float = 1.25
    omega_video: float = 0.5
    omega_text: float = 0.5
    kind: str = guidance.KIND_DROPOUT
    strength: float = 0.05
    perturb_seed: int = 0

    def __post_init__(self):
        if self.mode not in guidance.MODES:
            raise ValueError(
                f"unknown guidance mode {self.mode!r}; expected one of {guidance.MODES}"
            )
        if min(self.omega, self.omega_video, self.omega_text) < 0:
            raise ValueError("guidance weights must be >= 0")
        # bounds on kind/strength live in one place; build and discard
        guidance.Perturbation(kind=self.kind, strength=self.strength)

    def to_spec(self) -> guidance.GuidanceSpec:
        pert = None
        if self.mode == guidance.MODE_AUTO:
            pert = guidance.Perturbation(
                kind=self.kind, strength=self.strength, seed=self.perturb_seed
            )
        return guidance.GuidanceSpec(
            mode=self.mode,
            omega=self.omega,
            omega_video=self.omega_video,
            omega_text=self.omega_text,
            perturbation=pert,
            seed=self.perturb_seed,
        )


@dataclass
class DiffusionConfig:
    train_steps: int = 3000
    t_steps: int = 100
    batch: int = 32
    lr: float = 1e-4
    blocks: int = 4
    beta_start: float = 1e-4
    beta_end: float = 2e-2
    target: str = "eps"
    samples: int = 256
    sample_batch: int = 32

    def __post_init__(self):
        if min(self.train_steps, self.t_steps, self.batch, self.blocks) < 1:
            raise ValueError("training sizes must be positive")
        if min(self.samples, self.sample_batch) < 1:
            raise ValueError("sampling sizes must be positive")
        if not self.lr > 0:
            raise ValueError("learning rate must be > 0")
        if not 0.0 < self.beta_start <= self.beta_end < 1.0:
            raise ValueError("betas must satisfy 0 < start <= end < 1")
        if self.target not in ("eps", "x0"):
            raise ValueError("target must be 'eps' or 'x0'")


_SECTIONS: dict[str, type] = {
    "data": DataConfig,
    "duet": DuetConfig,
    "dash": DashConfig,
    "guidance": GuidanceConfig,
    "diffusion": DiffusionConfig,
    "metrics": MetricsConfig,
    "clean": CleanConfig,
}


def _build_section(name: str, raw: Any) -> Any:
    cls = _SECTIONS[name]
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be a JSON object")
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {', '.join(unknown)}")
    kwargs = dict(raw)
    if "foot_knee_range" in kwargs:  # JSON has no tuples
        kwargs["foot_knee_range"] = tuple(kwargs["foot_knee_range"])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad value in section {name!r}: {err}") from None


@dataclass
class RunConfig:
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    duet: DuetConfig = field(default_factory=DuetConfig)
    dash: DashConfig = field(default_factory=DashConfig)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    clean: CleanConfig = field(default_factory=CleanConfig)

    def __post_init__(self):
        # cross-section check: the alignment loss reads a denoiser hidden
        # layer, which must exist in the configured stack
        if self.dash.layer > self.diffusion.blocks:
            raise ConfigError(
                f"dash.layer ({self.dash.layer}) exceeds diffusion.blocks "
                f"({self.diffusion.blocks})"
            )

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config document must be a JSON object")
        unknown = sorted(set(raw) - set(_SECTIONS) - {"seed"})
        if unknown:
            raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
        seed = raw.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError("seed must be an integer")
        sections = {
            name: _build_section(name, raw[name]) for name in _SECTIONS if name in raw
        }
        return cls(seed=seed, **sections)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from None
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as err:
            raise ConfigError(f"cannot read config file {path}: {err}") from None
        return cls.from_json(text)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"seed": self.seed}
        for name in _SECTIONS:
            out[name] = dataclasses.asdict(getattr(self, name))
        out["clean"]["foot_knee_range"] = list(out["clean"]["foot_knee_range"])
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")

    def with_seed(self, seed: int) -> "RunConfig":
        """Copy with every seed-valued field replaced, so one flag moves
        the whole run to a fresh stream."""
        return dataclasses.replace(
            self,
            seed=seed,
            guidance=dataclasses.replace(self.guidance, perturb_seed=seed),
            metrics=dataclasses.replace(self.metrics, seed=seed),
        )


def default_config_path() -> Optional[str]:
    """Config file named by the environment, if any."""
    path = os.environ.get(ENV_CONFIG_PATH)
    return path if path else None


def load_or_default(path: Optional[str] = None) -> RunConfig:
    """Resolve a config: explicit path, then environment, then defaults."""
    if path is None:
        path = default_config_path()
    if path is None:
        return RunConfig()
    return RunConfig.load(path)


# Seed offsets keep the frozen feature maps on streams distinct from the
# learned parameters (the model burns seed..seed+3 internally).
_TEXT_SEED_OFFSET = 11
_VIDEO_SEED_OFFSET = 12


def build_synth_spec(cfg: RunConfig) -> synthdata.SynthSpec:
    d = cfg.data
    return synthdata.SynthSpec(
        classes=d.classes,
        frames=d.frames,
        dims=d.dims,
        harmonics=d.harmonics,
        noise=d.noise,
        seed=cfg.seed,
        per_class=d.per_class,
    )


def build_text_map(cfg: RunConfig) -> synthdata.TextFeatureMap:
    d = cfg.data
    return synthdata.TextFeatureMap(
        classes=d.classes,
        dim_out=d.text_dim,
        tokens=d.text_tokens,
        seed=cfg.seed + _TEXT_SEED_OFFSET,
    )


def build_video_map(cfg: RunConfig) -> synthdata.VideoFeatureMap:
    d = cfg.data
    return synthdata.VideoFeatureMap(
        dim_in=d.dims, dim_out=d.video_dim, seed=cfg.seed + _VIDEO_SEED_OFFSET
    )


def build_model(cfg: RunConfig) -> diffusion.Model:
    d, f = cfg.data, cfg.diffusion
    return diffusion.Model(
        motion_dim=d.dims,
        frames=d.frames,
        hidden=cfg.duet.hidden,
        blocks=f.blocks,
        text_dim=d.text_dim,
        text_tokens=d.text_tokens,
        video_dim=d.video_dim,
        video_tokens=synthdata.VideoFeatureMap.token_count(d.frames),
        steps=f.t_steps,
        target=f.target,
        conv_width=cfg.duet.conv_width,
        beta_start=f.beta_start,
        beta_end=f.beta_end,
        seed=cfg.seed,
    )


def build_schedule(cfg: RunConfig) -> diffusion.Schedule:
    f = cfg.diffusion
    return diffusion.Schedule(f.t_steps, f.beta_start, f.beta_end)


def build_extractor(cfg: RunConfig) -> metrics.FeatureExtractor:
    d = cfg.data
    return metrics.FeatureExtractor(
        frames=d.frames,
        motion_dim=d.dims,
        text_tokens=d.text_tokens,
        text_dim=d.text_dim,
        out_dim=cfg.metrics.feature_dim,
        seed=cfg.metrics.seed,
    )
