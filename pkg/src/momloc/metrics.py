"""Trajectory evaluation: positioning errors, thresholded accuracy, ATE, RPE.

Predictions and ground truth share one world frame by construction, so no
alignment step is applied anywhere.  ATE is the RMS of per-frame Euclidean
errors; RPE is the RMS error of frame-to-frame displacement differences
(translation only).  Accuracy uses a strict "<" at the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MetricsError",
    "EmptyTrajectory",
    "TooShort",
    "TrajectoryPrediction",
    "EvaluationReport",
    "ACCURACY_THRESHOLDS",
    "REPORT_COLUMNS",
    "positioning_errors",
    "accuracy_at",
    "absolute_trajectory_error",
    "relative_pose_error",
    "evaluate_trajectory",
]

ACCURACY_THRESHOLDS = (0.2, 0.3, 0.4, 0.5)
REPORT_COLUMNS = ("mean", "median", "std", "ate", "rpe", "acc_0.2", "acc_0.3", "acc_0.4", "acc_0.5")


class MetricsError(Exception):
    pass


class EmptyTrajectory(MetricsError):
    pass


class TooShort(MetricsError):
    pass


@dataclass(frozen=True)
class TrajectoryPrediction:
    """Time-ordered (frame_id, predicted, ground truth) triples."""

    frame_ids: np.ndarray
    predicted: np.ndarray
    ground_truth: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.frame_ids)
        p = np.asarray(self.predicted, dtype=float)
        g = np.asarray(self.ground_truth, dtype=float)
        if not (len(ids) == len(p) == len(g)):
            raise ValueError("misaligned trajectory arrays")
        if p.shape != g.shape or (len(p) and p.shape[1] != 3):
            raise ValueError("points must be (n, 3)")
        if len(ids) > 1 and not np.all(np.diff(ids) > 0):
            raise ValueError("frame ids must be strictly increasing")
        object.__setattr__(self, "frame_ids", ids)
        object.__setattr__(self, "predicted", p)
        object.__setattr__(self, "ground_truth", g)
        for name in ("frame_ids", "predicted", "ground_truth"):
            getattr(self, name).setflags(write=False)

    def __len__(self) -> int:
        return len(self.frame_ids)

    @property
    def errors(self) -> np.ndarray:
        return np.linalg.norm(self.predicted - self.ground_truth, axis=1)


@dataclass(frozen=True)
class EvaluationReport:
    """One Table-style result row; accuracy values are percentages."""

    mean: float
    median: float
    std: float
    ate: float
    rpe: float
    accuracy: dict[float, float]

    def as_row(self) -> tuple[float, ...]:
        return (self.mean, self.median, self.std, self.ate, self.rpe,
                *(self.accuracy[t] for t in ACCURACY_THRESHOLDS))


def _require_frames(traj: TrajectoryPrediction):
    if len(traj) == 0:
        raise EmptyTrajectory("trajectory has no frames")


def positioning_errors(traj: TrajectoryPrediction) -> tuple[float, float, float]:
    """(mean, median, std) of per-frame 3D errors.

    Median is the lower-middle element for even counts; std is the
    population standard deviation (divide by N).
    """
    _require_frames(traj)
    e = np.sort(traj.errors)
    median = float(e[(len(e) - 1) // 2])
    return float(e.mean()), median, float(e.std())


def accuracy_at(traj: TrajectoryPrediction, threshold: float) -> float:
    """Percentage of frames with error strictly below ``threshold`` meters."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    _require_frames(traj)
    return float(100.0 * np.count_nonzero(traj.errors < threshold) / len(traj))


def absolute_trajectory_error(traj: TrajectoryPrediction) -> float:
    """RMS of per-frame Euclidean errors."""
    _require_frames(traj)
    return float(np.sqrt(np.mean(traj.errors**2)))


def relative_pose_error(traj: TrajectoryPrediction, delta: int = 1) -> float:
    """RMS error of displacement vectors over a frame gap of ``delta``."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    if len(traj) < delta + 1:
        raise TooShort(f"need >= {delta + 1} frames, got {len(traj)}")
    dp = traj.predicted[delta:] - traj.predicted[:-delta]
    dg = traj.ground_truth[delta:] - traj.ground_truth[:-delta]
    return float(np.sqrt(np.mean(np.sum((dp - dg) ** 2, axis=1))))


def evaluate_trajectory(traj: TrajectoryPrediction, rpe_delta: int = 1) -> EvaluationReport:
    """Full report: error statistics, ATE, RPE, and accuracy thresholds."""
    mean, median, std = positioning_errors(traj)
    acc = {t: accuracy_at(traj, t) for t in ACCURACY_THRESHOLDS}
    return EvaluationReport(mean, median, std, absolute_trajectory_error(traj),
                            relative_pose_error(traj, rpe_delta), acc)
