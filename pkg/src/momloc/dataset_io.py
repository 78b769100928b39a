"""CSV persistence for datasets, reports, loss histories, and sweeps.

All files use '.' decimal separators, LF line endings, and floats printed
with 17 significant digits, so writing is deterministic and parse/write
round trips are byte exact.

Frames file: one row per frame with the world joints and, by default, the
observed per-camera joint pixels in camera-prefixed columns; observation
points are sampled from those on the fly.  An optional observations file
pre-materializes the sampled points as (frame_id, camera_id, point_index,
u, v) rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import REPORT_COLUMNS, EvaluationReport
from .simulator import SkeletonFrame

__all__ = [
    "DatasetFiles",
    "frames_header",
    "write_frames_csv",
    "read_frames_csv",
    "write_observations_csv",
    "read_observations_csv",
    "write_report_csv",
    "read_report_csv",
    "write_loss_csv",
    "write_trajectory_csv",
    "write_sweep_csv",
]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass(frozen=True)
class DatasetFiles:
    """Paths and declared row counts of one generated dataset."""

    frames: Path
    frame_count: int
    observations: Path | None = None
    observation_count: int = 0


def frames_header(n_cameras: int) -> list[str]:
    cols = ["frame_id", "subject_id", "pattern", "time_s", "cx", "cy", "cz"]
    for j in range(12):
        cols += [f"j{j}x", f"j{j}y", f"j{j}z"]
    for k in range(n_cameras):
        for j in range(12):
            cols += [f"c{k}_j{j}u", f"c{k}_j{j}v"]
    return cols


def write_frames_csv(path, frames) -> int:
    """Write frames; returns the row count."""
    if not frames:
        raise ValueError("no frames to write")
    n_cameras = frames[0].joints_pixel.shape[0]
    lines = [",".join(frames_header(n_cameras))]
    for f in frames:
        cells = [str(f.frame_id), str(f.subject_id), f.pattern, _fmt(f.time_s)]
        cells += [_fmt(v) for v in f.center_world]
        cells += [_fmt(v) for v in f.joints_world.ravel()]
        cells += [_fmt(v) for v in f.joints_pixel.ravel()]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")
    return len(frames)


def read_frames_csv(path, image_width: int = 640, image_height: int = 480) -> list[SkeletonFrame]:
    """Parse a frames file back into SkeletonFrame objects.

    The file stores observed pixels only, so the exact-projection fields of
    the returned frames alias the observed ones; in-bounds flags are
    recomputed against the given image size.
    """
    text = Path(path).read_text()
    lines = text.splitlines()
    header = lines[0].split(",")
    n_cameras = sum(1 for c in header if c.endswith("_j0u"))
    expected = frames_header(n_cameras)
    if header != expected:
        raise ValueError(f"unexpected frames header in {path}")
    frames = []
    for line in lines[1:]:
        cells = line.split(",")
        frame_id = int(cells[0])
        subject_id = int(cells[1])
        pattern = cells[2]
        time_s = float(cells[3])
        center = np.array([float(c) for c in cells[4:7]])
        joints = np.array([float(c) for c in cells[7:43]]).reshape(12, 3)
        px = np.array([float(c) for c in cells[43:]]).reshape(n_cameras, 12, 2)
        bounds = (
            (px[:, :, 0] >= 0) & (px[:, :, 0] <= image_width)
            & (px[:, :, 1] >= 0) & (px[:, :, 1] <= image_height)
        )
        frames.append(SkeletonFrame(frame_id, time_s, subject_id, pattern,
                                    joints, center, px, px.copy(), bounds))
    return frames


def write_observations_csv(path, frames, sampler, points_per_frame: int) -> int:
    """Materialize sampled observation points; returns the row count.

    ``sampler(frame, camera_index)`` must return (points_per_frame, 2).
    """
    lines = ["frame_id,camera_id,point_index,u,v"]
    count = 0
    for f in frames:
        for k in range(f.joints_pixel.shape[0]):
            pts = sampler(f, k)
            if len(pts) != points_per_frame:
                raise ValueError(f"sampler returned {len(pts)} points, expected {points_per_frame}")
            for i, (u, v) in enumerate(pts):
                lines.append(f"{f.frame_id},{k},{i},{_fmt(u)},{_fmt(v)}")
                count += 1
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")
    return count


def read_observations_csv(path, valid_frame_ids=None, points_per_frame: int | None = None):
    """Parse observation points into {(frame_id, camera_id): (n, 2)}.

    Validates referential integrity against ``valid_frame_ids`` and the
    declared per-(frame, camera) row count when given.
    """
    lines = Path(path).read_text().splitlines()
    if lines[0] != "frame_id,camera_id,point_index,u,v":
        raise ValueError(f"unexpected observations header in {path}")
    valid = set(valid_frame_ids) if valid_frame_ids is not None else None
    table: dict[tuple[int, int], list] = {}
    for line in lines[1:]:
        fid_s, cam_s, idx_s, u_s, v_s = line.split(",")
        fid, cam, idx = int(fid_s), int(cam_s), int(idx_s)
        if valid is not None and fid not in valid:
            raise ValueError(f"observation references unknown frame {fid}")
        rows = table.setdefault((fid, cam), [])
        if idx != len(rows):
            raise ValueError(f"non-contiguous point index {idx} for frame {fid} camera {cam}")
        rows.append((float(u_s), float(v_s)))
    out = {key: np.array(rows) for key, rows in table.items()}
    if points_per_frame is not None:
        for key, pts in out.items():
            if len(pts) != points_per_frame:
                raise ValueError(f"{key} has {len(pts)} points, expected {points_per_frame}")
    return out


def write_report_csv(path, reports: dict[str, EvaluationReport]) -> None:
    """Report rows keyed by walk pattern, in Table column order."""
    lines = ["pattern," + ",".join(REPORT_COLUMNS)]
    for pattern, report in reports.items():
        lines.append(pattern + "," + ",".join(_fmt(v) for v in report.as_row()))
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_report_csv(path) -> dict[str, dict[str, float]]:
    lines = Path(path).read_text().splitlines()
    if lines[0] != "pattern," + ",".join(REPORT_COLUMNS):
        raise ValueError(f"unexpected report header in {path}")
    out = {}
    for line in lines[1:]:
        cells = line.split(",")
        out[cells[0]] = dict(zip(REPORT_COLUMNS, (float(c) for c in cells[1:])))
    return out


def write_loss_csv(path, history) -> None:
    lines = ["epoch,L_loc_train,L_rec_train,L_loc_test,L_rec_test"]
    for row in history:
        lines.append(",".join([str(row.epoch), _fmt(row.l_loc_train), _fmt(row.l_rec_train),
                               _fmt(row.l_loc_test), _fmt(row.l_rec_test)]))
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def write_trajectory_csv(path, rows) -> None:
    """Per-frame ground truth and prediction, for plotting.

    ``rows`` yields (frame_id, pattern, gt (3,), pred (3,)).
    """
    lines = ["frame_id,pattern,gt_x,gt_y,gt_z,pred_x,pred_y,pred_z"]
    for frame_id, pattern, gt, pred in rows:
        cells = [str(frame_id), pattern] + [_fmt(v) for v in (*gt, *pred)]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def write_sweep_csv(path, rows) -> None:
    """Long-form sweep results: (level, metric, value) rows."""
    lines = ["level,metric,value"]
    for level, metric, value in rows:
        lines.append(f"{_fmt(level)},{metric},{_fmt(value)}")
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")
