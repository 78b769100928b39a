"""Mean-estimator sampling and network input assembly.

Single pixel observations along a body follow skewed, structure-dependent
distributions; arithmetic means of m sampled observations approach
normality, which is what makes them good regression inputs.  This module
builds those means, counts the combinatorial supply of them, assembles the
per-frame network inputs/targets (12 means of 30 points per camera, target
= mean of the 12 world joints), and provides a moment-based normality
diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import derive_rng
from .simulator import SkeletonFrame, sample_observation_points

__all__ = [
    "EstimatorError",
    "InvalidSubsetSize",
    "Overflow",
    "InsufficientSamples",
    "InvalidSplit",
    "MeanEstimator",
    "MeanEstimatorBatch",
    "NormalityReport",
    "DatasetSplit",
    "make_mean",
    "count_mean_estimators",
    "count_training_pairs",
    "build_batch",
    "normality_diagnostic",
    "split_dataset",
]

_BATCH_TAG = 3
_MAX_COUNT_N = 62
SKEW_LIMIT = 0.25
KURTOSIS_LIMIT = 0.5
MIN_DIAGNOSTIC_SAMPLES = 500


class EstimatorError(Exception):
    pass


class InvalidSubsetSize(EstimatorError):
    pass


class Overflow(EstimatorError):
    pass


class InsufficientSamples(EstimatorError):
    pass


class InvalidSplit(EstimatorError):
    pass


@dataclass(frozen=True)
class MeanEstimator:
    """Arithmetic mean of ``member_count`` sampled observations."""

    value: np.ndarray
    member_count: int
    indices: tuple[int, ...]


@dataclass(frozen=True)
class MeanEstimatorBatch:
    """One network training example: k x 12 pixel means and the world target."""

    per_camera_means: np.ndarray  # (n_cameras, means_per_image, 2), raw pixels
    target: np.ndarray            # (3,), mean of the 12 world joints

    def __post_init__(self):
        self.per_camera_means.setflags(write=False)
        self.target.setflags(write=False)


@dataclass(frozen=True)
class NormalityReport:
    skewness: np.ndarray
    excess_kurtosis: np.ndarray
    passed: bool


@dataclass(frozen=True)
class DatasetSplit:
    """Frame split by subject: training is random-walk only."""

    train: tuple[SkeletonFrame, ...]
    test: tuple[SkeletonFrame, ...]


def make_mean(points, member_count: int, seed: int) -> MeanEstimator:
    """Mean of ``member_count`` distinct observations, drawn without
    replacement under ``seed``."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if not 1 <= member_count <= n:
        raise InvalidSubsetSize(f"member count {member_count} not in [1, {n}]")
    idx = derive_rng(seed).choice(n, size=member_count, replace=False)
    return MeanEstimator(pts[idx].mean(axis=0), member_count, tuple(int(i) for i in idx))


def count_mean_estimators(n: int) -> int:
    """Number of distinct mean estimators over n observations: 2^n - 1."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > _MAX_COUNT_N:
        raise Overflow(f"n={n} exceeds the supported range ({_MAX_COUNT_N})")
    return (1 << n) - 1


def count_training_pairs(n: int) -> int:
    """Number of cross-paired training pairs: (2^n - 1)^2."""
    c = count_mean_estimators(n)
    return c * c


def build_batch(frame: SkeletonFrame, cameras=None, per_mean_points: int = 30,
                means_per_image: int = 12, seed: int = 0) -> MeanEstimatorBatch:
    """Assemble one training example from a frame.

    Per camera: draw ``per_mean_points`` observation points along the
    skeleton ``means_per_image`` times (independently seeded) and take each
    draw's mean.  The target is the mean of the frame's 12 world joints.
    Pixel-side seeds are derived independently of the target, so any pixel
    mean may pair with the frame's world mean.
    """
    n_cameras = frame.joints_pixel.shape[0]
    selected = list(range(n_cameras)) if cameras is None else list(cameras)
    means = np.empty((len(selected), means_per_image, 2))
    for mi, ci in enumerate(selected):
        for j in range(means_per_image):
            pts = sample_observation_points(
                frame, ci, per_mean_points, seed=_draw_seed(seed, frame.frame_id, ci, j)
            )
            means[mi, j] = pts.mean(axis=0)
    return MeanEstimatorBatch(means, frame.joints_world.mean(axis=0))


def _draw_seed(seed: int, frame_id: int, camera: int, draw: int) -> int:
    return int(np.random.SeedSequence([_BATCH_TAG, seed, frame_id, camera, draw]).generate_state(1)[0])


def normality_diagnostic(samples) -> NormalityReport:
    """Per-coordinate sample skewness and excess kurtosis check.

    Passes iff |skewness| < 0.25 and |excess kurtosis| < 0.5 on every
    coordinate.  Requires at least 500 samples.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if len(x) < MIN_DIAGNOSTIC_SAMPLES:
        raise InsufficientSamples(f"need >= {MIN_DIAGNOSTIC_SAMPLES} samples, got {len(x)}")
    centered = x - x.mean(axis=0)
    m2 = np.mean(centered**2, axis=0)
    m3 = np.mean(centered**3, axis=0)
    m4 = np.mean(centered**4, axis=0)
    skew = m3 / m2**1.5
    kurt = m4 / m2**2 - 3.0
    passed = bool(np.all(np.abs(skew) < SKEW_LIMIT) and np.all(np.abs(kurt) < KURTOSIS_LIMIT))
    return NormalityReport(skew, kurt, passed)


def split_dataset(frames, train_subjects, test_subjects) -> DatasetSplit:
    """Split frames by subject id; training keeps random-walk frames only."""
    train_ids = set(train_subjects)
    test_ids = set(test_subjects)
    overlap = train_ids & test_ids
    if overlap:
        raise InvalidSplit(f"subjects {sorted(overlap)} appear in both splits")
    train = tuple(f for f in frames if f.subject_id in train_ids and f.pattern == "random_walk")
    test = tuple(f for f in frames if f.subject_id in test_ids)
    return DatasetSplit(train, test)
