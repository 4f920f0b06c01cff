import json

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from motionduet import synthdata as sd

# ---------------------------------------------------------------------------
# Oracles: the template formula evaluated scalar-by-scalar, and a Frechet
# distance via scipy's general matrix square root (independent of the
# package's own metric code).
# ---------------------------------------------------------------------------


def template_oracle(spec, label, t, d):
    total = 0.0
    for h in range(1, spec.harmonics + 1):
        phase = 2 * np.pi * (0.37 * label + 0.21 * h + 0.11 * d)
        total += (1.0 / h) * np.sin(
            2 * np.pi * h * (label + 1) * t / spec.frames + phase
        )
    return total


def frechet_oracle(a, b):
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    ca = np.cov(a, rowvar=False)
    cb = np.cov(b, rowvar=False)
    root = scipy.linalg.sqrtm(ca @ cb)
    if np.iscomplexobj(root):
        root = root.real
    return float(((mu_a - mu_b) ** 2).sum() + np.trace(ca + cb - 2 * root))


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------


def test_same_seed_same_bits():
    spec = sd.SynthSpec(classes=3, frames=16, dims=4, seed=7, per_class=2)
    a = sd.synthesize_motions(spec)
    b = sd.synthesize_motions(spec)
    assert len(a) == len(b) == 6
    for ma, mb in zip(a, b):
        assert np.array_equal(ma.values, mb.values)
        assert ma.label == mb.label


def test_noiseless_corpus_equals_templates():
    spec = sd.SynthSpec(classes=2, frames=12, dims=3, noise=0.0, per_class=3)
    motions = sd.synthesize_motions(spec)
    for m in motions:
        assert np.array_equal(m.values, sd.class_template(spec, m.label))


def test_class_templates_are_distinct():
    spec = sd.SynthSpec(classes=4, frames=32, dims=4)
    for a in range(4):
        for b in range(a + 1, 4):
            diff = sd.class_template(spec, a) - sd.class_template(spec, b)
            assert (diff**2).mean() > 0.01


def test_template_matches_closed_form_oracle():
    spec = sd.SynthSpec(classes=3, frames=10, dims=4, harmonics=2)
    for label in range(3):
        got = sd.class_template(spec, label)
        for t in range(10):
            for d in range(4):
                assert got[t, d] == pytest.approx(
                    template_oracle(spec, label, t, d), abs=1e-12
                )


def test_rejects_single_class():
    with pytest.raises(ValueError):
        sd.SynthSpec(classes=1)


def test_template_rejects_bad_label():
    spec = sd.SynthSpec(classes=2)
    with pytest.raises(ValueError):
        sd.class_template(spec, 2)


# ---------------------------------------------------------------------------
# video feature surrogate
# ---------------------------------------------------------------------------


def test_zero_motion_maps_to_bias():
    vmap = sd.VideoFeatureMap(dim_in=4, seed=3)
    motion = sd.MotionSequence(np.zeros((16, 4)))
    feats = vmap(motion)
    assert feats.shape == (4, 4)
    for row in feats:
        assert np.allclose(row, vmap.bias, atol=1e-12)


def test_video_features_deterministic():
    vmap = sd.VideoFeatureMap(dim_in=3, seed=5)
    motion = sd.MotionSequence(np.random.default_rng(0).normal(size=(10, 3)))
    assert np.array_equal(vmap(motion), vmap(motion))
    # same seed, fresh map: identical weights
    again = sd.VideoFeatureMap(dim_in=3, seed=5)
    assert np.array_equal(vmap(motion), again(motion))


def test_video_token_count_is_quarter_of_frames():
    assert sd.VideoFeatureMap.token_count(64) == 16
    assert sd.VideoFeatureMap.token_count(10) == 3
    assert sd.VideoFeatureMap.token_count(1) == 1


def test_class_mean_feature_matches_map_of_template():
    # every stage is linear, so the Monte-Carlo mean must approach the
    # map of the noiseless template
    spec = sd.SynthSpec(classes=2, frames=16, dims=3, noise=0.5, per_class=500, seed=11)
    vmap = sd.VideoFeatureMap(dim_in=3, seed=1)
    motions = [m for m in sd.synthesize_motions(spec) if m.label == 0]
    assert len(motions) == 500
    mean_feats = np.mean([vmap(m) for m in motions], axis=0)
    expected = vmap(sd.MotionSequence(sd.class_template(spec, 0)))
    # noise level 0.5 over 500 samples: sampling error ~ 0.5/sqrt(500*4)
    assert np.abs(mean_feats - expected).max() < 0.05


def test_video_map_is_not_identity():
    vmap = sd.VideoFeatureMap(dim_in=4, seed=0)
    assert not np.allclose(vmap.weight, np.eye(4), atol=0.5)


def test_distribution_gap_is_measurable():
    spec = sd.SynthSpec(classes=2, frames=32, dims=4, noise=0.2, per_class=50)
    vmap = sd.VideoFeatureMap(dim_in=4, seed=2)
    motions = sd.synthesize_motions(spec)
    motion_rows = np.concatenate([m.values for m in motions])
    feature_rows = np.concatenate([vmap(m) for m in motions])
    assert frechet_oracle(motion_rows, feature_rows) > 0.1


# ---------------------------------------------------------------------------
# text feature surrogate
# ---------------------------------------------------------------------------


def test_text_features_identical_per_label():
    tmap = sd.TextFeatureMap(classes=3, dim_out=6, tokens=2, seed=4)
    assert np.array_equal(tmap(1), tmap(1))


def test_text_features_distinct_across_labels():
    tmap = sd.TextFeatureMap(classes=4, dim_out=8, seed=4)
    for a in range(4):
        for b in range(a + 1, 4):
            fa, fb = tmap(a), tmap(b)
            cos = (fa * fb).sum(axis=1) / (
                np.linalg.norm(fa, axis=1) * np.linalg.norm(fb, axis=1)
            )
            assert np.all(cos < 1.0 - 1e-6)


def test_text_feature_rows_are_unit_norm():
    tmap = sd.TextFeatureMap(classes=3, dim_out=5, tokens=3, seed=9)
    for label in range(3):
        norms = np.linalg.norm(tmap(label), axis=1)
        assert np.allclose(norms, 1.0, atol=1e-12)


def test_text_features_reject_unknown_label():
    tmap = sd.TextFeatureMap(classes=2)
    with pytest.raises(ValueError):
        tmap(2)


def test_bundle_materializes_missing_video_as_zeros():
    tmap = sd.TextFeatureMap(classes=2)
    bundle = sd.ConditionBundle(text=tmap(0))
    zeros = bundle.video_or_zeros(4, 8)
    assert zeros.shape == (4, 8)
    assert np.all(zeros == 0.0)


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------


def test_motion_file_round_trip(tmp_path):
    values = np.random.default_rng(1).normal(size=(7, 3)).astype(np.float32)
    motion = sd.MotionSequence(values.astype(np.float64), fps=25.0, label=2)
    path = tmp_path / "m.mdm"
    sd.write_motion_file(path, motion)
    back = sd.read_motion_file(path)
    assert back.frames == 7 and back.dims == 3
    assert back.fps == 25.0 and back.label == 2
    # payload is float32, and the input was float32-representable
    assert np.array_equal(back.values, motion.values)


def test_truncated_payload_reports_byte_counts(tmp_path):
    path = tmp_path / "m.mdm"
    sd.write_motion_file(path, sd.MotionSequence(np.zeros((4, 2))))
    raw = path.read_bytes()
    path.write_bytes(raw[:-5])
    with pytest.raises(sd.MotionFormatError) as err:
        sd.read_motion_file(path)
    assert "32" in str(err.value) and "27" in str(err.value)


def test_wide_layout_file_parses(tmp_path):
    # 263-dim per-frame layout used by full-scale motion datasets
    motion = sd.MotionSequence(np.zeros((5, 263)))
    path = tmp_path / "wide.mdm"
    sd.write_motion_file(path, motion)
    assert sd.read_motion_file(path).dims == 263


def test_csv_import(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("a,b,c\n1,2,3\n4,5,6\n")
    motion = sd.read_motion_file(path)
    assert motion.frames == 2 and motion.dims == 3
    assert np.array_equal(motion.values, [[1, 2, 3], [4, 5, 6]])


def test_csv_rejects_ragged_rows(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("a,b\n1,2\n3\n")
    with pytest.raises(sd.MotionFormatError) as err:
        sd.read_motion_file(path)
    assert "row 3" in str(err.value)


def test_feature_file_round_trip(tmp_path):
    feats = np.random.default_rng(2).normal(size=(4, 6)).astype(np.float32)
    path = tmp_path / "f.mdf"
    sd.write_feature_file(path, feats, kind="video")
    back, kind = sd.read_feature_file(path)
    assert kind == "video"
    assert np.array_equal(back, feats.astype(np.float64))


def test_landmark_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    frames = [
        {name: rng.normal(size=3) for name in sd.JOINT_NAMES} for _ in range(3)
    ]
    path = tmp_path / "lm.jsonl"
    sd.write_landmark_file(path, frames)
    back = sd.read_landmark_file(path)
    assert len(back) == 3
    for orig, parsed in zip(frames, back):
        for name in sd.JOINT_NAMES:
            assert np.allclose(parsed[name], orig[name], atol=1e-12)


def test_landmark_bad_line_names_line_number(tmp_path):
    path = tmp_path / "lm.jsonl"
    path.write_text('{"frame": 0, "joints": {"Nose": [0,0,0]}}\nnot json\n')
    with pytest.raises(sd.MotionFormatError) as err:
        sd.read_landmark_file(path)
    assert "line 2" in str(err.value)


def test_samples_file_round_trip(tmp_path):
    path = tmp_path / "s.bin"
    g = np.random.default_rng(4)
    motions = [
        sd.MotionSequence(g.normal(size=(5, 3)).astype(np.float32).astype(np.float64), label=i % 2)
        for i in range(6)
    ]
    sd.write_samples_file(path, motions)
    back = sd.read_samples_file(path)
    assert len(back) == 6
    for orig, parsed in zip(motions, back):
        assert np.array_equal(parsed.values, orig.values)
        assert parsed.label == orig.label


def test_samples_file_rejects_mixed_shapes(tmp_path):
    motions = [
        sd.MotionSequence(np.zeros((5, 3))),
        sd.MotionSequence(np.zeros((4, 3))),
    ]
    with pytest.raises(ValueError, match="share frames"):
        sd.write_samples_file(tmp_path / "s.bin", motions)


def test_samples_file_rejects_wrong_kind(tmp_path):
    path = tmp_path / "f.bin"
    sd.write_feature_file(path, np.zeros((2, 3)))
    with pytest.raises(sd.MotionFormatError, match="not a samples file"):
        sd.read_samples_file(path)


def test_samples_file_truncation_detected(tmp_path):
    path = tmp_path / "s.bin"
    sd.write_samples_file(path, [sd.MotionSequence(np.ones((4, 2)))])
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])
    with pytest.raises(sd.MotionFormatError, match="payload bytes"):
        sd.read_samples_file(path)


@settings(max_examples=20, deadline=None)
@given(
    st.integers(min_value=1, max_value=30),
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=0, max_value=2**31 - 1),
)
def test_motion_round_trip_property(frames, dims, seed):
    values = (
        np.random.default_rng(seed).normal(size=(frames, dims)).astype(np.float32)
    )
    motion = sd.MotionSequence(values.astype(np.float64))
    import tempfile, os

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "m.mdm")
        sd.write_motion_file(path, motion)
        assert np.array_equal(sd.read_motion_file(path).values, motion.values)
