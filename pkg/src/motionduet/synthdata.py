"""Synthetic motion corpus and surrogate condition features.

Motion sequences are class templates (sums of sinusoids, closed form
documented on `class_template`) plus seeded Gaussian noise.  Condition
features come from two fixed seeded maps: a video surrogate (temporal
pooling + affine map + smoothing, deliberately not the identity so the
two feature spaces have a measurable distribution gap) and a per-class
text embedding table.

File containers: one JSON header line, then a raw little-endian float32
payload, row major.  CSV files with a header row are also accepted for
motion import.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

JOINT_NAMES = (
    "Nose",
    "LShoulder",
    "RShoulder",
    "LHip",
    "RHip",
    "LKnee",
    "RKnee",
    "LAnkle",
    "RAnkle",
    "LFoot",
    "RFoot",
)


class MotionFormatError(ValueError):
    """Malformed motion/landmark container."""


@dataclass
class MotionSequence:
    values: np.ndarray
    fps: float = 20.0
    label: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise ValueError("motion values must be a (T, D) array with T >= 1")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("motion values must be finite")

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]


@dataclass
class ConditionBundle:
    text: np.ndarray
    video: Optional[np.ndarray] = None
    source_id: str = ""

    def __post_init__(self):
        self.text = np.asarray(self.text, dtype=np.float64)
        if self.text.ndim != 2 or self.text.shape[0] < 1:
            raise ValueError("text features must be a (N_t, D_t) array")
        if self.video is not None:
            self.video = np.asarray(self.video, dtype=np.float64)
            if self.video.ndim != 2:
                raise ValueError("video features must be a (N_v, D_v) array")

    def video_or_zeros(self, tokens: int, dims: int) -> np.ndarray:
        """Absent video materializes as all-zeros, so downstream code can
        stay branch-free."""
        if self.video is None:
            return np.zeros((tokens, dims))
        return self.video


@dataclass
class SynthSpec:
    classes: int = 4
    frames: int = 64
    dims: int = 8
    harmonics: int = 3
    noise: float = 0.1
    seed: int = 0
    per_class: int = 32

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError("need at least 2 classes")
        if self.noise < 0:
            raise ValueError("noise level must be >= 0")
        if self.frames < 1 or self.dims < 1 or self.per_class < 1:
            raise ValueError("frames, dims and per_class must be positive")


def class_template(spec: SynthSpec, label: int) -> np.ndarray:
    """Closed-form template for one class:

    template[t, d] = sum_{h=1..H} (1/h) * sin(2*pi*h*(label+1)*t/T
                                              + 2*pi*(0.37*label + 0.21*h + 0.11*d))

    Classes differ in fundamental frequency (label+1 cycles per window)
    and phase; channels differ in phase only.
    """
    if not 0 <= label < spec.classes:
        raise ValueError(f"label {label} out of range for {spec.classes} classes")
    t = np.arange(spec.frames)[:, None]
    d = np.arange(spec.dims)[None, :]
    out = np.zeros((spec.frames, spec.dims))
    for h in range(1, spec.harmonics + 1):
        phase = 2 * np.pi * (0.37 * label + 0.21 * h + 0.11 * d)
        out += (1.0 / h) * np.sin(2 * np.pi * h * (label + 1) * t / spec.frames + phase)
    return out


def synthesize_motions(spec: SynthSpec) -> list[MotionSequence]:
    """Corpus of per_class sequences for each class, in class-major order.
    A pure function of the spec: same spec, same bits."""
    rng = np.random.default_rng(spec.seed)
    out = []
    for label in range(spec.classes):
        template = class_template(spec, label)
        for _ in range(spec.per_class):
            noise = rng.standard_normal(template.shape)
            out.append(MotionSequence(template + spec.noise * noise, label=label))
    return out


# ---------------------------------------------------------------------------
# surrogate condition encoders
# ---------------------------------------------------------------------------


class VideoFeatureMap:
    """Fixed seeded motion-to-video feature surrogate.

    Pipeline: pool frames into ceil(T/4) tokens (block means), apply a
    seeded affine map, then a 3-tap moving average along tokens with
    edge renormalization.  Every stage is linear, so the expectation of
    the features is the map of the expected motion, and zero motion maps
    exactly to the bias.
    """

    def __init__(self, dim_in: int, dim_out: Optional[int] = None, seed: int = 0):
        self.dim_in = dim_in
        self.dim_out = dim_in if dim_out is None else dim_out
        rng = np.random.default_rng(seed)
        self.weight = rng.normal(size=(dim_in, self.dim_out)) / math.sqrt(dim_in)
        self.bias = rng.normal(size=self.dim_out)

    @staticmethod
    def token_count(frames: int) -> int:
        return math.ceil(frames / 4)

    def __call__(self, motion: MotionSequence) -> np.ndarray:
        values = motion.values
        n_tokens = self.token_count(motion.frames)
        edges = np.linspace(0, motion.frames, n_tokens + 1).astype(int)
        pooled = np.stack(
            [values[a:b].mean(axis=0) for a, b in zip(edges[:-1], edges[1:])]
        )
        mapped = pooled @ self.weight + self.bias
        return _smooth_tokens(mapped)


def _smooth_tokens(tokens: np.ndarray) -> np.ndarray:
    """3-tap moving average over the token axis; windows are clipped at the
    edges and renormalized, so constant inputs pass through unchanged."""
    n = tokens.shape[0]
    out = np.empty_like(tokens)
    for i in range(n):
        lo, hi = max(0, i - 1), min(n, i + 2)
        out[i] = tokens[lo:hi].mean(axis=0)
    return out


class TextFeatureMap:
    """Per-class token embeddings: a seeded projection of the class one-hot,
    one projection per token position, each row normalized to unit norm."""

    def __init__(self, classes: int, dim_out: int = 8, tokens: int = 4, seed: int = 0):
        if classes < 1:
            raise ValueError("need at least one class")
        self.classes = classes
        self.dim_out = dim_out
        self.tokens = tokens
        rng = np.random.default_rng(seed)
        # table[c, i] = normalized projection of one-hot(c) at position i
        raw = rng.normal(size=(classes, tokens, dim_out))
        self.table = raw / np.linalg.norm(raw, axis=-1, keepdims=True)

    def __call__(self, label: int) -> np.ndarray:
        if not 0 <= label < self.classes:
            raise ValueError(f"unknown label {label}")
        return self.table[label].copy()


def make_bundle(
    motion: MotionSequence,
    text_map: TextFeatureMap,
    video_map: Optional[VideoFeatureMap] = None,
    source_id: str = "",
) -> ConditionBundle:
    video = None if video_map is None else video_map(motion)
    return ConditionBundle(text=text_map(motion.label), video=video, source_id=source_id)


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------


def _write_container(path, header: dict, payload: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(payload).tobytes())


def _read_container(path) -> tuple[dict, bytes]:
    with open(path, "rb") as fh:
        raw = fh.read()
    newline = raw.find(b"\n")
    if newline < 0:
        raise MotionFormatError(f"{path}: missing header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MotionFormatError(f"{path}: bad JSON header: {exc}") from exc
    if not isinstance(header, dict):
        raise MotionFormatError(f"{path}: header must be a JSON object")
    return header, raw[newline + 1 :]


def write_motion_file(path, motion: MotionSequence) -> None:
    header = {
        "frames": motion.frames,
        "dims": motion.dims,
        "fps": motion.fps,
        "label": motion.label,
    }
    _write_container(path, header, motion.values.astype("<f4"))


def read_motion_file(path) -> MotionSequence:
    with open(path, "rb") as fh:
        first = fh.read(1)
    if first != b"{":
        return _read_motion_csv(path)
    header, payload = _read_container(path)
    for key in ("frames", "dims"):
        if key not in header:
            raise MotionFormatError(f"{path}: header missing '{key}'")
    frames, dims = int(header["frames"]), int(header["dims"])
    expected = frames * dims * 4
    if len(payload) != expected:
        raise MotionFormatError(
            f"{path}: expected {expected} payload bytes, got {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(frames, dims)
    return MotionSequence(
        values.astype(np.float64),
        fps=float(header.get("fps", 20.0)),
        label=int(header.get("label", 0)),
    )


def _read_motion_csv(path) -> MotionSequence:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise MotionFormatError(f"{path}: CSV needs a header row and data rows")
    width = len(rows[0])
    data = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise MotionFormatError(f"{path}: row {i} has {len(row)} of {width} columns")
        try:
            data.append([float(v) for v in row])
        except ValueError as exc:
            raise MotionFormatError(f"{path}: row {i}: {exc}") from exc
    return MotionSequence(np.array(data))


def write_feature_file(path, features: np.ndarray, kind: str = "features") -> None:
    features = np.asarray(features, dtype=np.float64)
    header = {"kind": kind, "shape": list(features.shape)}
    _write_container(path, header, features.astype("<f4"))


def read_feature_file(path) -> tuple[np.ndarray, str]:
    header, payload = _read_container(path)
    shape = tuple(int(s) for s in header.get("shape", ()))
    expected = int(np.prod(shape)) * 4 if shape else 0
    if len(payload) != expected:
        raise MotionFormatError(
            f"{path}: expected {expected} payload bytes, got {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(shape)
    return values.astype(np.float64), str(header.get("kind", "features"))


def write_samples_file(path, motions: Sequence[MotionSequence]) -> None:
    """One container holding a whole batch of sequences; labels ride in the
    header so the file is self-describing for evaluation."""
    if not motions:
        raise ValueError("need at least one motion to write")
    frames, dims = motions[0].frames, motions[0].dims
    for m in motions:
        if (m.frames, m.dims) != (frames, dims):
            raise ValueError("samples in one file must share frames and dims")
    stacked = np.stack([m.values for m in motions])
    header = {
        "kind": "samples",
        "shape": list(stacked.shape),
        "labels": [int(m.label) for m in motions],
        "fps": motions[0].fps,
    }
    _write_container(path, header, stacked.astype("<f4"))


def read_samples_file(path) -> list[MotionSequence]:
    header, payload = _read_container(path)
    if header.get("kind") != "samples":
        raise MotionFormatError(
            f"{path}: not a samples file (kind={header.get('kind')!r})"
        )
    shape = tuple(int(s) for s in header.get("shape", ()))
    if len(shape) != 3:
        raise MotionFormatError(f"{path}: samples shape must be (N, T, D)")
    expected = int(np.prod(shape)) * 4
    if len(payload) != expected:
        raise MotionFormatError(
            f"{path}: expected {expected} payload bytes, got {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float64)
    labels = header.get("labels", [0] * shape[0])
    if len(labels) != shape[0]:
        raise MotionFormatError(f"{path}: {len(labels)} labels for {shape[0]} samples")
    fps = float(header.get("fps", 20.0))
    return [
        MotionSequence(values[i], fps=fps, label=int(labels[i]))
        for i in range(shape[0])
    ]


# ---------------------------------------------------------------------------
# landmark files (JSON lines, one object per frame)
# ---------------------------------------------------------------------------


def read_landmark_file(path) -> list[dict]:
    frames = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MotionFormatError(f"{path}: line {lineno}: bad JSON: {exc.msg}") from exc
            if "joints" not in obj or not isinstance(obj["joints"], dict):
                raise MotionFormatError(f"{path}: line {lineno}: missing 'joints' object")
            joints = {}
            for name, pos in obj["joints"].items():
                arr = np.asarray(pos, dtype=np.float64)
                if arr.shape != (3,):
                    raise MotionFormatError(
                        f"{path}: line {lineno}: joint '{name}' is not a 3-vector"
                    )
                joints[name] = arr
            frames.append(joints)
    return frames


def write_landmark_file(path, frames: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, joints in enumerate(frames):
            obj = {
                "frame": i,
                "joints": {k: [float(x) for x in v] for k, v in sorted(joints.items())},
            }
            fh.write(json.dumps(obj, sort_keys=True))
            fh.write("\n")
