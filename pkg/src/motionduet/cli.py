"""Command line around the whole pipeline.

Subcommands: synth (write a seeded corpus), clean (screen landmark
files), train (fit the model and write a checkpoint), sample (generate
sequences from a checkpoint), eval (metric report with confidence
intervals), gradcheck (finite-difference verification).

Every command is deterministic: identical config and seeds produce
byte-identical output files.  Exit codes: 0 success, 1 usage error,
2 data or format error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import checks
from . import diffusion as df
from . import numkit as nk
from . import poseclean, synthdata
from .checkpoint import load_checkpoint, read_manifest, save_checkpoint
from .config import (
    ConfigError,
    RunConfig,
    build_extractor,
    build_model,
    build_synth_spec,
    build_text_map,
    build_video_map,
    load_or_default,
)
from .metrics import evaluate_repeats
from .synthdata import ConditionBundle, MotionFormatError, MotionSequence

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

# flag value -> guidance mode in the config document
_GUIDANCE_FLAGS = {"none": "none", "cfg": "fused_cfg", "auto": "auto"}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage problems; the contract here reserves 2
    for data errors, so remap."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _write_json(path, doc: dict) -> None:
    p = Path(path)
    if p.parent != Path(""):
        p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_config(args) -> RunConfig:
    cfg = load_or_default(getattr(args, "config", None))
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _build_corpus(cfg: RunConfig):
    motions = synthdata.synthesize_motions(build_synth_spec(cfg))
    return motions, build_text_map(cfg), build_video_map(cfg)


def _load_model(ckpt_path):
    manifest = read_manifest(ckpt_path)
    echo = manifest.get("config")
    if not isinstance(echo, dict):
        raise MotionFormatError(f"{ckpt_path}: checkpoint carries no config echo")
    cfg = RunConfig.from_dict(echo)
    model = build_model(cfg)
    step, _ = load_checkpoint(ckpt_path, model)
    return model, cfg, step


def _make_bundles(
    cfg: RunConfig, motions, text_map, video_map, count: int, mode: str
) -> tuple[list[ConditionBundle], list[int]]:
    """Conditions for generation, interleaving classes so every class shows
    up early regardless of the class-major corpus layout."""
    classes, per_class = cfg.data.classes, cfg.data.per_class
    bundles, labels = [], []
    for i in range(count):
        c = i % classes
        j = (i // classes) % per_class
        m = motions[c * per_class + j]
        video = video_map(m) if mode == "dual" else None
        bundles.append(
            ConditionBundle(text=text_map(m.label), video=video, source_id=f"sample/{i}")
        )
        labels.append(m.label)
    return bundles, labels


def _generate(
    model, cfg: RunConfig, mode: str, gspec, count: Optional[int] = None
) -> list[MotionSequence]:
    motions, text_map, video_map = _build_corpus(cfg)
    n = cfg.diffusion.samples if count is None else count
    bundles, labels = _make_bundles(cfg, motions, text_map, video_map, n, mode)
    out: list[MotionSequence] = []
    step = cfg.diffusion.sample_batch
    for c, lo in enumerate(range(0, len(bundles), step)):
        chunk = bundles[lo : lo + step]
        out.extend(
            df.sample_many(model, chunk, gspec, seed=(cfg.seed, c), policy=cfg.duet.policy)
        )
    for m, lab in zip(out, labels):
        m.label = int(lab)
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_synth(args) -> int:
    cfg = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    motions, text_map, video_map = _build_corpus(cfg)
    for i, m in enumerate(motions):
        stem = f"{i:05d}"
        synthdata.write_motion_file(out / f"{stem}.motion", m)
        synthdata.write_feature_file(out / f"{stem}.text.feat", text_map(m.label), kind="text")
        synthdata.write_feature_file(out / f"{stem}.video.feat", video_map(m), kind="video")
    print(f"wrote {len(motions)} motions to {out}")
    return EXIT_OK


def _cmd_clean(args) -> int:
    cfg = _resolve_config(args)
    input_path = Path(args.input)
    if input_path.is_dir():
        files = sorted(p for p in input_path.iterdir() if p.suffix == ".jsonl")
        if not files:
            raise MotionFormatError(f"{input_path}: no .jsonl landmark files found")
    elif input_path.exists():
        files = [input_path]
    else:
        raise MotionFormatError(f"{input_path}: no such file or directory")
    videos = []
    for f in files:
        frames = synthdata.read_landmark_file(f)
        report = poseclean.screen_video(frames, cfg.clean)
        videos.append({"path": f.name, **report})
    accepted = sum(v["accepted"] for v in videos)
    _write_json(
        args.report,
        {"videos": videos, "accepted": accepted, "rejected": len(videos) - accepted},
    )
    print(f"screened {len(videos)} videos: {accepted} accepted")
    return EXIT_OK


def _cmd_train(args) -> int:
    if args.resume:
        # the checkpoint's config echo wins; a fresh document could silently
        # disagree with the stored parameter shapes
        echo = read_manifest(args.resume).get("config")
        if not isinstance(echo, dict):
            raise MotionFormatError(f"{args.resume}: checkpoint carries no config echo")
        cfg = RunConfig.from_dict(echo)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
    else:
        cfg = _resolve_config(args)

    motions, text_map, video_map = _build_corpus(cfg)
    model = build_model(cfg)
    model.norm = df.NormStats.fit([m.values for m in motions])
    dataset = df.build_training_set(motions, text_map, video_map, model.norm)
    opt = nk.Adam(nk.collect_params(model), lr=cfg.diffusion.lr)

    start = 0
    if args.resume:
        start, _ = load_checkpoint(args.resume, model, opt)
    total = cfg.diffusion.train_steps
    if start > total:
        raise ConfigError(
            f"checkpoint is at step {start}, beyond train_steps={total}"
        )
    steps = total - start
    if args.steps is not None:
        if args.steps < 1:
            raise ConfigError("--steps must be positive")
        steps = min(steps, args.steps)
    stop = start + steps

    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    log_path = Path(args.log) if args.log else Path(str(out) + ".log")
    with open(log_path, "a" if args.resume else "w", encoding="utf-8") as log_stream:
        df.train_loop(
            model,
            dataset,
            cfg.dash,
            steps=steps,
            batch_size=cfg.diffusion.batch,
            lr=cfg.diffusion.lr,
            seed=cfg.seed,
            start_step=start,
            opt=opt,
            log_stream=log_stream,
        )
    save_checkpoint(out, model, opt, step=stop, config=cfg.to_dict())
    print(f"trained steps {start}..{stop}; checkpoint at {out}")
    return EXIT_OK


def _cmd_sample(args) -> int:
    model, cfg, _ = _load_model(args.ckpt)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    gcfg = cfg.guidance
    if args.guidance is not None:
        gcfg = dataclasses.replace(gcfg, mode=_GUIDANCE_FLAGS[args.guidance])
    samples = _generate(model, cfg, args.mode, gcfg.to_spec())
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    synthdata.write_samples_file(out, samples)
    print(f"wrote {len(samples)} samples to {out}")
    return EXIT_OK


def _read_motion_dir(path: Path) -> list[MotionSequence]:
    files = sorted(p for p in path.iterdir() if p.suffix == ".motion")
    if not files:
        raise MotionFormatError(f"{path}: no .motion files found")
    return [synthdata.read_motion_file(f) for f in files]


def _cmd_eval(args) -> int:
    model, cfg, _ = _load_model(args.ckpt)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    real = _read_motion_dir(Path(args.data))
    if args.samples:
        p = Path(args.samples)
        gen = _read_motion_dir(p) if p.is_dir() else synthdata.read_samples_file(p)
    else:
        gen = _generate(model, cfg, "dual", cfg.guidance.to_spec())

    extractor = build_extractor(cfg)
    real_feats = np.stack([extractor.motion(m.values) for m in real])
    gen_feats = np.stack([extractor.motion(m.values) for m in gen])
    text_map = build_text_map(cfg)
    text_feats = np.stack([extractor.text(text_map(m.label)) for m in gen])
    by_label: dict[int, list[int]] = {}
    for i, m in enumerate(gen):
        by_label.setdefault(m.label, []).append(i)
    groups = [by_label[k] for k in sorted(by_label)]

    report = evaluate_repeats(real_feats, gen_feats, text_feats, groups, cfg.metrics)
    _write_json(
        args.report,
        {
            "metrics": report,
            "real": len(real),
            "generated": len(gen),
            "seed": cfg.seed,
        },
    )
    print(f"fid={report['fid']['mean']:.6f} over {len(gen)} generated sequences")
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    report, ok = checks.main_suite(seed=args.seed or 0, fault=args.fault)
    print(report)
    return EXIT_OK if ok else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="motionduet", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        return p

    p = add("synth", _cmd_synth, "write a synthetic motion corpus with condition features")
    p.add_argument("--config", default=None, help="run config JSON (default: $MOTIONDUET_CONFIG or built-ins)")
    p.add_argument("--out", required=True, help="output directory")

    p = add("clean", _cmd_clean, "screen landmark files for pose validity")
    p.add_argument("--config", default=None)
    p.add_argument("--input", required=True, help="landmark .jsonl file or directory")
    p.add_argument("--report", required=True, help="report JSON path")

    p = add("train", _cmd_train, "train on the synthetic corpus and write a checkpoint")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--config", default=None)
    group.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", default=None, help="JSON-lines training log (default: <out>.log)")
    p.add_argument("--steps", type=int, default=None,
                   help="train at most this many steps this run (resume later)")

    p = add("sample", _cmd_sample, "generate sequences from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--mode", choices=("text", "dual"), default="dual")
    p.add_argument("--guidance", choices=tuple(_GUIDANCE_FLAGS), default=None,
                   help="override the config's guidance mode")
    p.add_argument("--out", required=True, help="samples container path")

    p = add("eval", _cmd_eval, "metric report for generated vs real data")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True, help="directory of real .motion files")
    p.add_argument("--samples", default=None,
                   help="evaluate this samples file (or motion dir) instead of generating")
    p.add_argument("--report", required=True, help="report JSON path")

    p = add("gradcheck", _cmd_gradcheck, "finite-difference gradient verification")
    p.add_argument("--fault", choices=checks.CHECK_NAMES, default=None,
                   help="flip one gradient's sign to prove the harness catches it")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help exits 0; usage errors exit 1
        return int(exc.code or 0)
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except FloatingPointError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, MotionFormatError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
