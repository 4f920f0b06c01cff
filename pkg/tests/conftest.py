"""Shared fixtures: a small trained model that several suites probe.

The mini recipe is tuned so class-conditional structure actually shows
up in samples within a few seconds of training: few diffusion steps
with a hot beta_end, so the terminal forward distribution is close to
the pure noise the sampler starts from.
"""

import copy
import sys
from types import SimpleNamespace

import numpy as np
import pytest

from motionduet import config as cf
from motionduet import diffusion as df
from motionduet import synthdata as sd

MINI_DOC = {
    "seed": 0,
    "data": {
        "classes": 3,
        "frames": 16,
        "dims": 4,
        "per_class": 8,
        "noise": 0.05,
        "harmonics": 2,
    },
    "duet": {"hidden": 16},
    "dash": {"layer": 1},
    "diffusion": {
        "train_steps": 1500,
        "t_steps": 25,
        "blocks": 2,
        "batch": 8,
        "lr": 2e-3,
        "beta_end": 0.3,
        "samples": 30,
        "sample_batch": 30,
    },
    "metrics": {"pool": 4, "repeats": 5, "diversity_pairs": 10, "modality_pairs": 4},
}


def mini_config(overrides: dict | None = None, seed: int = 0) -> cf.RunConfig:
    doc = copy.deepcopy(MINI_DOC)
    for section, values in (overrides or {}).items():
        if isinstance(values, dict):
            doc.setdefault(section, {}).update(values)
        else:
            doc[section] = values
    return cf.RunConfig.from_dict(doc).with_seed(seed)


def train_mini(overrides: dict | None = None, seed: int = 0) -> SimpleNamespace:
    """Synthesize, fit the normalizer, train; everything seeded from one
    integer so sweeps stay reproducible."""
    cfg = mini_config(overrides, seed)
    spec = cf.build_synth_spec(cfg)
    motions = sd.synthesize_motions(spec)
    text_map, video_map = cf.build_text_map(cfg), cf.build_video_map(cfg)
    model = cf.build_model(cfg)
    model.norm = df.NormStats.fit([m.values for m in motions])
    dataset = df.build_training_set(motions, text_map, video_map, model.norm)
    df.train_loop(
        model,
        dataset,
        cfg.dash,
        steps=cfg.diffusion.train_steps,
        batch_size=cfg.diffusion.batch,
        lr=cfg.diffusion.lr,
        seed=cfg.seed,
    )
    templates = np.stack(
        [sd.class_template(spec, c) for c in range(spec.classes)]
    )
    return SimpleNamespace(
        cfg=cfg,
        spec=spec,
        motions=motions,
        text_map=text_map,
        video_map=video_map,
        model=model,
        dataset=dataset,
        templates=templates,
    )


def make_bundles(world, count: int, mode: str = "dual"):
    """Generation conditions cycling over classes, so every class appears
    evenly regardless of count."""
    classes, per_class = world.spec.classes, world.spec.per_class
    bundles, labels = [], []
    for i in range(count):
        c = i % classes
        m = world.motions[c * per_class + (i // classes) % per_class]
        video = world.video_map(m) if mode == "dual" else None
        bundles.append(
            sd.ConditionBundle(
                text=world.text_map(m.label), video=video, source_id=f"gen/{i}"
            )
        )
        labels.append(m.label)
    return bundles, labels


@pytest.fixture(scope="session")
def mini_world():
    return train_mini()


def pytest_terminal_summary(terminalreporter):
    # verdict lines collected by the acceptance suite, repeated after the
    # run so they survive pytest's stdout capture
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
