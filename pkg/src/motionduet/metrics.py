"""Evaluation suite over a frozen random feature space.

Generated and reference motions are pushed through one fixed seeded
projection, then compared with Frechet distance, diversity,
multimodality, mean paired text-motion distance, and retrieval
precision.  The extractor is deliberately untrained: it is shared by
every system under comparison, so differences in the numbers come from
the motions, not the evaluator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np


@dataclass
class MetricsConfig:
    feature_dim: int = 16
    pool: int = 8  # retrieval pool size; 32 is the standard-scale choice
    diversity_pairs: int = 32
    modality_pairs: int = 8
    repeats: int = 20
    seed: int = 0

    def __post_init__(self):
        if min(self.feature_dim, self.diversity_pairs, self.modality_pairs, self.repeats) < 1:
            raise ValueError("metric sizes must be positive")
        if self.pool < 2:
            raise ValueError("retrieval pool needs at least 2 candidates")


class FeatureExtractor:
    """Frozen affine-plus-tanh maps from motion and text space to a shared
    feature space.  Construct once per experiment and reuse for every
    system being compared."""

    def __init__(
        self,
        frames: int,
        motion_dim: int,
        text_tokens: int,
        text_dim: int,
        out_dim: int = 16,
        seed: int = 0,
    ):
        if min(frames, motion_dim, text_tokens, text_dim, out_dim) < 1:
            raise ValueError("all extractor sizes must be positive")
        rng = np.random.default_rng(seed)
        self.frames = frames
        self.motion_dim = motion_dim
        self.text_tokens = text_tokens
        self.text_dim = text_dim
        self.out_dim = out_dim
        m_in, t_in = frames * motion_dim, text_tokens * text_dim
        self._wm = rng.normal(size=(m_in, out_dim)) / np.sqrt(m_in)
        self._bm = 0.1 * rng.normal(size=out_dim)
        self._wt = rng.normal(size=(t_in, out_dim)) / np.sqrt(t_in)
        self._bt = 0.1 * rng.normal(size=out_dim)

    def motion(self, values) -> np.ndarray:
        """(T, D) -> (out_dim,), or batched (M, T, D) -> (M, out_dim)."""
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape[-2:] != (self.frames, self.motion_dim):
            raise ValueError(
                f"expected (.., {self.frames}, {self.motion_dim}) motions, got {arr.shape}"
            )
        flat = arr.reshape(arr.shape[:-2] + (-1,))
        return np.tanh(flat @ self._wm + self._bm)

    def text(self, features) -> np.ndarray:
        arr = np.asarray(features, dtype=np.float64)
        if arr.shape[-2:] != (self.text_tokens, self.text_dim):
            raise ValueError(
                f"expected (.., {self.text_tokens}, {self.text_dim}) text features,"
                f" got {arr.shape}"
            )
        flat = arr.reshape(arr.shape[:-2] + (-1,))
        return np.tanh(flat @ self._wt + self._bt)


@dataclass
class GaussianSummary:
    """Mean and covariance of a feature cloud; the covariance is
    symmetrized and eigenvalue-clamped at zero on construction."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        if self.mu.ndim != 1:
            raise ValueError("mu must be a vector")
        d = self.mu.shape[0]
        if self.sigma.shape != (d, d):
            raise ValueError("sigma must be square and match mu")
        sym = (self.sigma + self.sigma.T) / 2.0
        vals, vecs = np.linalg.eigh(sym)
        self.sigma = (vecs * np.clip(vals, 0.0, None)) @ vecs.T

    @classmethod
    def fit(cls, features) -> "GaussianSummary":
        arr = np.asarray(features, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 2:
            raise ValueError("need a (M >= 2, D) feature matrix")
        return cls(arr.mean(axis=0), np.cov(arr, rowvar=False))


_PSD_TOL = 1e-10


def _psd_sqrt(sym: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(sym)
    if vals.min() < -_PSD_TOL:
        raise ValueError(f"matrix has eigenvalue {vals.min():.3e}, not PSD within tolerance")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def fid(a: GaussianSummary, b: GaussianSummary) -> float:
    """Frechet distance between two Gaussian summaries.

    The cross term uses the symmetric arrangement sqrt(Sa) Sb sqrt(Sa),
    whose eigenvalues are clamped at zero when they dip below zero by at
    most 1e-10; anything more negative raises.
    """
    if a.mu.shape != b.mu.shape:
        raise ValueError("summaries have mismatched dimensions")
    root = _psd_sqrt(a.sigma)
    inner = root @ b.sigma @ root
    inner = (inner + inner.T) / 2.0
    vals = np.linalg.eigvalsh(inner)
    if vals.min() < -_PSD_TOL:
        raise ValueError(f"cross term has eigenvalue {vals.min():.3e}, not PSD within tolerance")
    cross = np.sqrt(np.clip(vals, 0.0, None)).sum()
    dmu = a.mu - b.mu
    d2 = float(dmu @ dmu + np.trace(a.sigma) + np.trace(b.sigma) - 2.0 * cross)
    # identical summaries land at 0 up to trace round-off; a distance
    # must not come out negative
    return max(d2, 0.0)


def _draw_pairs(
    count: int, pairs: int, rng: np.random.Generator, replace: bool
) -> tuple[np.ndarray, np.ndarray]:
    if replace:
        # pair members stay distinct; pairs may reuse rows
        left = np.empty(pairs, dtype=int)
        right = np.empty(pairs, dtype=int)
        for i in range(pairs):
            left[i], right[i] = rng.choice(count, size=2, replace=False)
        return left, right
    if count < 2 * pairs:
        raise ValueError(
            f"{pairs} disjoint pairs need {2 * pairs} rows, got {count};"
            " pass replace=True to reuse rows"
        )
    idx = rng.permutation(count)[: 2 * pairs]
    return idx[:pairs], idx[pairs:]


def diversity(features, pairs: int, seed: int = 0, replace: bool = False) -> float:
    """Mean Euclidean distance over `pairs` seeded random disjoint pairs."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 2:
        raise ValueError("need a (M >= 2, D) feature matrix")
    if pairs < 1:
        raise ValueError("need at least one pair")
    left, right = _draw_pairs(f.shape[0], pairs, np.random.default_rng(seed), replace)
    return float(np.linalg.norm(f[left] - f[right], axis=1).mean())


def multimodality(
    features_per_condition: Sequence, pairs: int, seed: int = 0, replace: bool = False
) -> float:
    """Intra-condition diversity averaged over conditions; condition c
    draws its pairs from a generator seeded by (seed, c)."""
    if not features_per_condition:
        raise ValueError("need at least one condition")
    per = []
    for c, block in enumerate(features_per_condition):
        f = np.asarray(block, dtype=np.float64)
        if f.ndim != 2 or f.shape[0] < 2:
            raise ValueError(f"condition {c} needs at least 2 generations")
        left, right = _draw_pairs(f.shape[0], pairs, np.random.default_rng((seed, c)), replace)
        per.append(np.linalg.norm(f[left] - f[right], axis=1).mean())
    return float(np.mean(per))


def mm_dist(text_features, motion_features) -> float:
    """Mean Euclidean distance between paired text and motion features."""
    t = np.asarray(text_features, dtype=np.float64)
    m = np.asarray(motion_features, dtype=np.float64)
    if t.shape != m.shape or t.ndim != 2:
        raise ValueError("paired feature matrices must share a (N, D) shape")
    return float(np.linalg.norm(t - m, axis=1).mean())


class RPrecision(NamedTuple):
    top1: float
    top2: float
    top3: float


def r_precision(text_features, motion_features, pool: int = 32, seed: int = 0) -> RPrecision:
    """Retrieval accuracy of each motion's own text among seeded distractors.

    Candidate list per query: the true text first, then pool-1 distinct
    distractor texts drawn without replacement.  Distance ties resolve
    toward the lower candidate index, so the truth wins its ties.
    """
    t = np.asarray(text_features, dtype=np.float64)
    m = np.asarray(motion_features, dtype=np.float64)
    if t.shape != m.shape or t.ndim != 2:
        raise ValueError("paired feature matrices must share a (N, D) shape")
    n = t.shape[0]
    if pool < 2:
        raise ValueError("pool needs at least 2 candidates")
    if n < pool:
        raise ValueError(f"need at least pool={pool} pairs, got {n}")
    rng = np.random.default_rng(seed)
    hits = np.zeros(3)
    for i in range(n):
        others = np.concatenate([np.arange(i), np.arange(i + 1, n)])
        distractors = rng.choice(others, size=pool - 1, replace=False)
        d_true = np.linalg.norm(t[i] - m[i])
        d_other = np.linalg.norm(t[distractors] - m[i], axis=1)
        rank = 1 + int((d_other < d_true).sum())
        for k in range(3):
            hits[k] += rank <= k + 1
    top = hits / n
    return RPrecision(float(top[0]), float(top[1]), float(top[2]))


def metric_report(values: Mapping[str, Sequence[float]], seeds: Sequence[int]) -> dict:
    """{metric: {mean, ci95, seeds}} with a normal-approximation 95% CI
    over the per-seed values."""
    seeds = [int(s) for s in seeds]
    report = {}
    for name in sorted(values):
        vals = np.asarray(values[name], dtype=np.float64)
        if vals.shape != (len(seeds),):
            raise ValueError(f"{name}: expected one value per seed")
        ci = 0.0 if vals.size < 2 else 1.96 * vals.std(ddof=1) / np.sqrt(vals.size)
        report[name] = {"mean": float(vals.mean()), "ci95": float(ci), "seeds": seeds}
    return report


def evaluate_sets(
    real_features: np.ndarray,
    gen_features: np.ndarray,
    text_features: np.ndarray,
    groups: Sequence[Sequence[int]],
    cfg: MetricsConfig,
    seed: int,
) -> dict[str, float]:
    """All five metrics for one seed.

    real/gen features are (M, D_f) clouds; text_features pairs row i with
    gen_features row i; groups lists generation indices per condition for
    the multimodality term.
    """
    gen = np.asarray(gen_features, dtype=np.float64)
    per_condition = [gen[np.asarray(g, dtype=int)] for g in groups]
    top = r_precision(text_features, gen, pool=cfg.pool, seed=seed)
    return {
        "fid": fid(GaussianSummary.fit(real_features), GaussianSummary.fit(gen)),
        "diversity": diversity(gen, cfg.diversity_pairs, seed=seed),
        "multimodality": multimodality(per_condition, cfg.modality_pairs, seed=seed),
        "mm_dist": mm_dist(text_features, gen),
        "r_precision_top1": top.top1,
        "r_precision_top2": top.top2,
        "r_precision_top3": top.top3,
    }


def evaluate_repeats(
    real_features: np.ndarray,
    gen_features: np.ndarray,
    text_features: np.ndarray,
    groups: Sequence[Sequence[int]],
    cfg: MetricsConfig,
) -> dict:
    """metric_report over cfg.repeats reseeded passes (seed, seed+1, ...)."""
    seeds = [cfg.seed + r for r in range(cfg.repeats)]
    collected: dict[str, list[float]] = {}
    for s in seeds:
        one = evaluate_sets(real_features, gen_features, text_features, groups, cfg, s)
        for name, value in one.items():
            collected.setdefault(name, []).append(value)
    return metric_report(collected, seeds)
