import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motionduet import poseclean as pc

# ---------------------------------------------------------------------------
# Oracle: independent vector arithmetic on plain Python floats.
# ---------------------------------------------------------------------------


def angle_oracle(u, v):
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    return math.degrees(math.acos(max(-1.0, min(1.0, dot / (nu * nv)))))


def back_face_oracle(frame):
    def sub(a, b):
        return [x - y for x, y in zip(frame[a], frame[b])]

    v_back = sub("RShoulder", "LShoulder")
    v_hip = sub("RHip", "LHip")
    v_body = [0.5 * (a + b) for a, b in zip(v_back, v_hip)]
    mid = [0.5 * (a + b) for a, b in zip(frame["LShoulder"], frame["RShoulder"])]
    v_face = [a - b for a, b in zip(frame["Nose"], mid)]
    return angle_oracle(v_body, v_face)


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------


def base_frame():
    """Passes all three criteria: body axis and face vector are both near
    vertical, legs bent naturally."""
    return {
        "Nose": np.array([0.0, 2.0, 0.0]),
        "LShoulder": np.array([-0.01, 1.5, 0.0]),
        "RShoulder": np.array([0.01, 1.9, 0.0]),
        "LHip": np.array([-0.01, 0.9, 0.0]),
        "RHip": np.array([0.01, 1.3, 0.0]),
        "LKnee": np.array([-0.1, 0.5, 0.0]),
        "RKnee": np.array([0.1, 0.5, 0.0]),
        "LAnkle": np.array([-0.1, 0.1, 0.0]),
        "RAnkle": np.array([0.1, 0.1, 0.0]),
        "LFoot": np.array([-0.1, 0.05, 0.1]),
        "RFoot": np.array([0.1, 0.05, 0.1]),
    }


def head_fail_frame():
    """Back-face passes (face parallel to the tilted body axis), head tilt
    fails (50 degrees from vertical), legs fine."""
    frame = base_frame()
    tilt = np.array([math.sin(math.radians(50)), math.cos(math.radians(50)), 0.0])
    frame["LShoulder"] = np.array([0.0, 1.5, 0.0]) - 0.2 * tilt
    frame["RShoulder"] = np.array([0.0, 1.5, 0.0]) + 0.2 * tilt
    frame["LHip"] = np.array([0.0, 1.0, 0.0]) - 0.2 * tilt
    frame["RHip"] = np.array([0.0, 1.0, 0.0]) + 0.2 * tilt
    mid = 0.5 * (frame["LShoulder"] + frame["RShoulder"])
    frame["Nose"] = mid + 0.3 * tilt
    return frame


def random_frame(seed):
    g = np.random.default_rng(seed)
    frame = {name: g.normal(size=3) for name in base_frame()}
    return frame


DEFAULTS = pc.CleanConfig()


def test_fixture_frames_behave_as_designed():
    assert pc.frame_verdict(base_frame(), DEFAULTS).valid
    verdict = pc.frame_verdict(head_fail_frame(), DEFAULTS)
    assert verdict.back_face and verdict.foot_knee and not verdict.head
    assert not verdict.valid


# ---------------------------------------------------------------------------
# back-face angle
# ---------------------------------------------------------------------------


def test_back_face_parallel_is_zero():
    frame = base_frame()
    # v_body points +x; place nose so v_face is also +x
    frame["LShoulder"] = np.array([-0.5, 1.5, 0.0])
    frame["RShoulder"] = np.array([0.5, 1.5, 0.0])
    frame["LHip"] = np.array([-0.5, 1.0, 0.0])
    frame["RHip"] = np.array([0.5, 1.0, 0.0])
    frame["Nose"] = np.array([0.4, 1.5, 0.0])
    assert pc.back_face_angle(frame) == pytest.approx(0.0, abs=1e-9)


def test_back_face_orthogonal_is_ninety_and_fails_default():
    frame = base_frame()
    frame["LShoulder"] = np.array([-0.5, 1.5, 0.0])
    frame["RShoulder"] = np.array([0.5, 1.5, 0.0])
    frame["LHip"] = np.array([-0.5, 1.0, 0.0])
    frame["RHip"] = np.array([0.5, 1.0, 0.0])
    frame["Nose"] = np.array([0.0, 1.5, 0.7])
    assert pc.back_face_angle(frame) == pytest.approx(90.0, abs=1e-9)
    assert not pc.frame_verdict(frame, DEFAULTS).back_face


def test_back_face_matches_oracle_on_random_frames():
    for seed in range(30):
        frame = random_frame(seed)
        try:
            got = pc.back_face_angle(frame)
        except pc.DegeneratePoseError:
            continue
        assert got == pytest.approx(back_face_oracle(frame), abs=1e-9)


def test_back_face_symmetric_under_double_negation():
    frame = base_frame()
    mirrored = dict(frame)
    # swapping L/R shoulders and hips negates v_body; reflecting the nose
    # through the mid-shoulder point negates v_face
    mirrored["LShoulder"], mirrored["RShoulder"] = frame["RShoulder"], frame["LShoulder"]
    mirrored["LHip"], mirrored["RHip"] = frame["RHip"], frame["LHip"]
    mid = 0.5 * (frame["LShoulder"] + frame["RShoulder"])
    mirrored["Nose"] = 2 * mid - frame["Nose"]
    assert pc.back_face_angle(mirrored) == pytest.approx(
        pc.back_face_angle(frame), abs=1e-9
    )


# ---------------------------------------------------------------------------
# head tilt
# ---------------------------------------------------------------------------


def test_head_tilt_zero_when_nose_directly_above():
    frame = base_frame()
    mid = 0.5 * (frame["LShoulder"] + frame["RShoulder"])
    frame["Nose"] = mid + np.array([0.0, 0.4, 0.0])
    assert pc.head_tilt_angle(frame) == pytest.approx(0.0, abs=1e-9)


def test_head_tilt_horizontal_is_ninety_and_fails():
    frame = base_frame()
    mid = 0.5 * (frame["LShoulder"] + frame["RShoulder"])
    frame["Nose"] = mid + np.array([0.4, 0.0, 0.0])
    assert pc.head_tilt_angle(frame) == pytest.approx(90.0, abs=1e-9)
    assert not pc.frame_verdict(frame, DEFAULTS).head


def test_head_tilt_thirty_degree_boundary_is_valid():
    # v_head = (1, sqrt(3), 0) is exactly 30 degrees from vertical
    frame = base_frame()
    mid = 0.5 * (frame["LShoulder"] + frame["RShoulder"])
    frame["Nose"] = mid + np.array([1.0, math.sqrt(3.0), 0.0])
    assert pc.head_tilt_angle(frame) == pytest.approx(30.0, abs=1e-6)
    assert pc.frame_verdict(frame, DEFAULTS).head


# ---------------------------------------------------------------------------
# foot-knee
# ---------------------------------------------------------------------------


def _set_leg(frame, side, upper, foot):
    frame[f"{side}Knee"] = np.array([0.0, 0.5, 0.0])
    frame[f"{side}Hip"] = frame[f"{side}Knee"] + np.asarray(upper, dtype=float)
    frame[f"{side}Ankle"] = np.array([0.0, 0.1, 0.0])
    frame[f"{side}Foot"] = frame[f"{side}Ankle"] + np.asarray(foot, dtype=float)


def test_foot_knee_antiparallel_pass():
    frame = base_frame()
    for side in "LR":
        _set_leg(frame, side, [0.0, 0.5, 0.0], [0.0, -0.2, 0.0])
    left, right = pc.foot_knee_angles(frame)
    assert left == pytest.approx(180.0, abs=1e-9)
    assert right == pytest.approx(180.0, abs=1e-9)
    assert pc.frame_verdict(frame, DEFAULTS).foot_knee


def test_foot_knee_parallel_fails():
    frame = base_frame()
    for side in "LR":
        _set_leg(frame, side, [0.0, 0.5, 0.0], [0.0, 0.2, 0.0])
    left, right = pc.foot_knee_angles(frame)
    assert left == pytest.approx(0.0, abs=1e-9)
    assert not pc.frame_verdict(frame, DEFAULTS).foot_knee


def test_foot_knee_exactly_75_degrees_passes():
    # rotate the reference direction by exactly 75 degrees in the x-y plane
    frame = base_frame()
    a = math.radians(75.0)
    for side in "LR":
        _set_leg(frame, side, [0.0, 1.0, 0.0], [math.sin(a), math.cos(a), 0.0])
    left, right = pc.foot_knee_angles(frame)
    assert left == pytest.approx(75.0, abs=1e-6)
    assert right == pytest.approx(75.0, abs=1e-6)
    assert pc.frame_verdict(frame, DEFAULTS).foot_knee


def test_foot_knee_one_bad_leg_fails():
    frame = base_frame()
    _set_leg(frame, "L", [0.0, 1.0, 0.0], [0.0, -0.2, 0.0])  # 180, fine
    _set_leg(frame, "R", [0.0, 1.0, 0.0], [0.0, 0.2, 0.0])  # 0, bad
    assert not pc.frame_verdict(frame, DEFAULTS).foot_knee


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------


def test_verdict_matches_oracle_on_100_random_frames():
    for seed in range(100):
        frame = random_frame(seed)
        verdict = pc.frame_verdict(frame, DEFAULTS)
        try:
            back = pc.back_face_angle(frame) <= DEFAULTS.theta0
        except pc.DegeneratePoseError:
            back = False
        try:
            head = pc.head_tilt_angle(frame) <= DEFAULTS.theta1
        except pc.DegeneratePoseError:
            head = False
        try:
            lo, hi = DEFAULTS.foot_knee_range
            left, right = pc.foot_knee_angles(frame)
            foot = lo <= left <= hi and lo <= right <= hi
        except pc.DegeneratePoseError:
            foot = False
        assert (verdict.back_face, verdict.head, verdict.foot_knee) == (
            back,
            head,
            foot,
        )
        assert verdict.valid == (back and head and foot)


def test_degenerate_frame_is_invalid_not_fatal():
    frame = {name: np.zeros(3) for name in base_frame()}
    verdict = pc.frame_verdict(frame, DEFAULTS)
    assert not verdict.valid
    assert not (verdict.back_face or verdict.head or verdict.foot_knee)


def test_missing_joint_is_invalid_not_fatal():
    frame = base_frame()
    del frame["Nose"]
    verdict = pc.frame_verdict(frame, DEFAULTS)
    assert not verdict.back_face and not verdict.head
    assert verdict.foot_knee  # legs unaffected


# ---------------------------------------------------------------------------
# video-level decision
# ---------------------------------------------------------------------------


def test_sample_indices_formula():
    assert pc.sample_indices(23, 12) == [2 * i for i in range(12)]
    assert pc.sample_indices(12, 12) == list(range(12))
    assert pc.sample_indices(5, 12) == [0, 1, 2, 3, 4]
    assert pc.sample_indices(100, 1) == [0]


def test_all_valid_accepted():
    frames = [base_frame() for _ in range(12)]
    score, accepted = pc.video_validity(frames, DEFAULTS)
    assert score == 1.0 and accepted


def test_eight_of_twelve_rejected():
    frames = [base_frame() for _ in range(8)] + [head_fail_frame() for _ in range(4)]
    score, accepted = pc.video_validity(frames, DEFAULTS)
    assert score == pytest.approx(8 / 12)
    assert not accepted


def test_nine_of_twelve_accepted():
    frames = [base_frame() for _ in range(9)] + [head_fail_frame() for _ in range(3)]
    score, accepted = pc.video_validity(frames, DEFAULTS)
    assert score == pytest.approx(0.75)
    assert accepted


def test_validity_monotone_in_frame_repair():
    frames = [base_frame() for _ in range(8)] + [head_fail_frame() for _ in range(4)]
    before, _ = pc.video_validity(frames, DEFAULTS)
    frames[-1] = base_frame()
    after, _ = pc.video_validity(frames, DEFAULTS)
    assert after >= before


def test_empty_sequence_rejected():
    with pytest.raises(ValueError):
        pc.video_validity([], DEFAULTS)


def test_screen_video_report_shape():
    frames = [base_frame() for _ in range(12)]
    report = pc.screen_video(frames, DEFAULTS)
    assert report["accepted"] is True
    assert report["score"] == 1.0
    assert len(report["perFrame"]) == 12
    assert all(entry["valid"] for entry in report["perFrame"])


def test_config_validation():
    with pytest.raises(ValueError):
        pc.CleanConfig(theta0=0.0)
    with pytest.raises(ValueError):
        pc.CleanConfig(foot_knee_range=(100.0, 90.0))
    with pytest.raises(ValueError):
        pc.CleanConfig(ratio=0.0)
    with pytest.raises(ValueError):
        pc.CleanConfig(sample_frames=0)


# ---------------------------------------------------------------------------
# invariances
# ---------------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(
    st.integers(min_value=0, max_value=10_000),
    st.floats(min_value=-50, max_value=50, allow_nan=False),
    st.floats(min_value=-50, max_value=50, allow_nan=False),
    st.floats(min_value=-50, max_value=50, allow_nan=False),
    st.floats(min_value=0.1, max_value=20, allow_nan=False),
)
def test_angles_invariant_under_translation_and_scaling(seed, dx, dy, dz, scale):
    frame = random_frame(seed)
    shift = np.array([dx, dy, dz])
    moved = {k: (v + shift) * scale for k, v in frame.items()}
    for fn in (pc.back_face_angle, pc.head_tilt_angle):
        try:
            before = fn(frame)
        except pc.DegeneratePoseError:
            continue
        assert fn(moved) == pytest.approx(before, abs=1e-9)
    try:
        orig = pc.foot_knee_angles(frame)
    except pc.DegeneratePoseError:
        return
    got = pc.foot_knee_angles(moved)
    assert got[0] == pytest.approx(orig[0], abs=1e-9)
    assert got[1] == pytest.approx(orig[1], abs=1e-9)
