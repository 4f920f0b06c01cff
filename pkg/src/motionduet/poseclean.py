"""Geometric validity screening for pose-landmark sequences.

Per frame, three tests on 3-D joint positions (+y is global up):

- back-face: angle between the mean of the shoulder and hip lateral
  vectors and the nose-from-mid-shoulder vector must be <= theta0
- head tilt: angle between the nose-from-mid-shoulder vector and global
  vertical must be <= theta1
- foot-knee: per leg, the angle between (hip - knee) and (foot - ankle)
  must lie in a closed interval, both legs

A sequence is accepted when the fraction of valid frames, over a fixed
uniform subsample, reaches the ratio threshold.  Degenerate geometry
(zero-length vectors from tracking dropouts) invalidates the frame
rather than aborting the video.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

UP = np.array([0.0, 1.0, 0.0])


class DegeneratePoseError(ValueError):
    """A required direction vector has zero length."""


@dataclass
class CleanConfig:
    theta0: float = 20.0
    theta1: float = 30.0
    foot_knee_range: tuple[float, float] = (75.0, 180.0)
    ratio: float = 0.7
    sample_frames: int = 12

    def __post_init__(self):
        if not 0 < self.theta0 < 180 or not 0 < self.theta1 < 180:
            raise ValueError("theta0 and theta1 must lie in (0, 180)")
        low, high = self.foot_knee_range
        if not 0 <= low < high <= 180:
            raise ValueError("foot-knee range must satisfy 0 <= low < high <= 180")
        if not 0 < self.ratio <= 1:
            raise ValueError("ratio must lie in (0, 1]")
        if self.sample_frames < 1:
            raise ValueError("sample_frames must be >= 1")


@dataclass
class FrameVerdict:
    back_face: bool
    head: bool
    foot_knee: bool

    @property
    def valid(self) -> bool:
        return self.back_face and self.head and self.foot_knee


def _joint(frame: Mapping, name: str) -> np.ndarray:
    try:
        pos = np.asarray(frame[name], dtype=np.float64)
    except KeyError as exc:
        raise DegeneratePoseError(f"missing joint {name}") from exc
    if pos.shape != (3,) or not np.all(np.isfinite(pos)):
        raise DegeneratePoseError(f"joint {name} is not a finite 3-vector")
    return pos


def _angle_deg(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegeneratePoseError("zero-length direction vector")
    cos = np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0)
    return math.degrees(math.acos(cos))


def _mid_shoulder(frame: Mapping) -> np.ndarray:
    return 0.5 * (_joint(frame, "LShoulder") + _joint(frame, "RShoulder"))


def back_face_angle(frame: Mapping) -> float:
    """Angle between the averaged lateral body vector and the face vector."""
    v_back = _joint(frame, "RShoulder") - _joint(frame, "LShoulder")
    v_hip = _joint(frame, "RHip") - _joint(frame, "LHip")
    v_body = 0.5 * (v_back + v_hip)
    v_face = _joint(frame, "Nose") - _mid_shoulder(frame)
    return _angle_deg(v_body, v_face)


def head_tilt_angle(frame: Mapping) -> float:
    """Angle between the nose-from-mid-shoulder vector and global vertical."""
    v_head = _joint(frame, "Nose") - _mid_shoulder(frame)
    return _angle_deg(v_head, UP)


def foot_knee_angles(frame: Mapping) -> tuple[float, float]:
    """Per-leg angle between the shin reference (hip - knee) and the foot
    direction (foot - ankle).  Returns (left, right)."""
    out = []
    for side in ("L", "R"):
        upper = _joint(frame, f"{side}Hip") - _joint(frame, f"{side}Knee")
        foot = _joint(frame, f"{side}Foot") - _joint(frame, f"{side}Ankle")
        out.append(_angle_deg(upper, foot))
    return out[0], out[1]


def frame_verdict(frame: Mapping, cfg: CleanConfig) -> FrameVerdict:
    """Evaluate all three criteria.  Degenerate geometry fails the affected
    criterion instead of raising."""
    try:
        back_ok = back_face_angle(frame) <= cfg.theta0
    except DegeneratePoseError as exc:
        log.debug("back-face degenerate: %s", exc)
        back_ok = False
    try:
        head_ok = head_tilt_angle(frame) <= cfg.theta1
    except DegeneratePoseError as exc:
        log.debug("head-tilt degenerate: %s", exc)
        head_ok = False
    low, high = cfg.foot_knee_range
    try:
        left, right = foot_knee_angles(frame)
        foot_ok = low <= left <= high and low <= right <= high
    except DegeneratePoseError as exc:
        log.debug("foot-knee degenerate: %s", exc)
        foot_ok = False
    return FrameVerdict(back_face=back_ok, head=head_ok, foot_knee=foot_ok)


def sample_indices(total: int, count: int) -> list[int]:
    """Uniform subsample: idx_i = floor(i * (T - 1) / (count - 1)).  Short
    clips (T < count) use every frame once."""
    if total < 1:
        raise ValueError("need at least one frame")
    if total < count:
        return list(range(total))
    if count == 1:
        return [0]
    return [i * (total - 1) // (count - 1) for i in range(count)]


def video_validity(
    frames: Sequence[Mapping], cfg: CleanConfig
) -> tuple[float, bool]:
    """Valid-frame ratio over the uniform subsample, and the accept flag."""
    if len(frames) == 0:
        raise ValueError("empty landmark sequence")
    indices = sample_indices(len(frames), cfg.sample_frames)
    valid = sum(frame_verdict(frames[i], cfg).valid for i in indices)
    score = valid / len(indices)
    return score, score >= cfg.ratio


def screen_video(frames: Sequence[Mapping], cfg: CleanConfig) -> dict:
    """Full per-video report: score, accept flag, and sampled-frame verdicts."""
    if len(frames) == 0:
        raise ValueError("empty landmark sequence")
    indices = sample_indices(len(frames), cfg.sample_frames)
    verdicts = [frame_verdict(frames[i], cfg) for i in indices]
    valid = sum(v.valid for v in verdicts)
    score = valid / len(indices)
    return {
        "score": score,
        "accepted": score >= cfg.ratio,
        "perFrame": [
            {
                "frame": int(i),
                "backFace": v.back_face,
                "head": v.head,
                "footKnee": v.foot_knee,
                "valid": v.valid,
            }
            for i, v in zip(indices, verdicts)
        ],
    }
