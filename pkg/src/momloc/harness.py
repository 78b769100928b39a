"""Experiment commands: generate, baseline, train, eval, sweep.

Each command is a pure function of (config, seeds, input files) to output
bytes: re-running with identical inputs reproduces identical artifacts.
Reports are written as CSV, with PNG figures rendered alongside unless
figures are disabled.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from . import dataset_io, plotting
from .config import ExperimentConfig, InvalidConfig, with_overrides
from .estimators import build_batch, split_dataset
from .geometry import dlt_pnp, baseline_localize
from .metrics import (
    REPORT_COLUMNS,
    EvaluationReport,
    TrajectoryPrediction,
    evaluate_trajectory,
)
from .network import (
    CheckpointMismatch,
    NetworkParameters,
    TrainConfig,
    TrainingPairTensor,
    encoder_forward,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .simulator import generate_dataset

__all__ = [
    "cmd_generate",
    "cmd_baseline",
    "cmd_train",
    "cmd_eval",
    "cmd_sweep",
    "build_training_tensors",
    "predict_centers",
    "default_paths",
]

SWEEP_AXES = ("jitter", "noise", "subjects")


def default_paths(config: ExperimentConfig) -> dict[str, Path]:
    out = config.out_path()
    return {
        "frames": out / "frames.csv",
        "observations": out / "observations.csv",
        "checkpoint": out / "checkpoint.txt",
        "losses": out / "losses.csv",
        "loss_figure": out / "losses.png",
        "eval_report": out / "report_eval.csv",
        "trajectory": out / "trajectory.csv",
        "eval_figure": out / "trajectory.png",
    }


def _load_frames(config: ExperimentConfig, frames_path=None):
    path = Path(frames_path) if frames_path else default_paths(config)["frames"]
    return dataset_io.read_frames_csv(path, config.image_width, config.image_height)


def cmd_generate(config: ExperimentConfig, write_observations: bool = False) -> dataset_io.DatasetFiles:
    """Generate the dataset files; prints row counts."""
    paths = default_paths(config)
    paths["frames"].parent.mkdir(parents=True, exist_ok=True)
    frames = generate_dataset(config.arena(), config.noise(), config.passes(), config.master_seed)
    n = dataset_io.write_frames_csv(paths["frames"], frames)
    print(f"frames: {n} rows -> {paths['frames']}")
    obs_path = None
    obs_count = 0
    if write_observations:
        per_frame = config.per_mean_points * config.means_per_image

        def sampler(frame, camera_index):
            batch_seeds = [
                _materialize_points(frame, camera_index, config, j)
                for j in range(config.means_per_image)
            ]
            return np.concatenate(batch_seeds, axis=0)

        obs_count = dataset_io.write_observations_csv(paths["observations"], frames, sampler, per_frame)
        obs_path = paths["observations"]
        print(f"observations: {obs_count} rows -> {obs_path}")
    return dataset_io.DatasetFiles(paths["frames"], n, obs_path, obs_count)


def _materialize_points(frame, camera_index, config, draw):
    from .estimators import _draw_seed
    from .simulator import sample_observation_points

    seed = _draw_seed(config.master_seed, frame.frame_id, camera_index, draw)
    return sample_observation_points(frame, camera_index, config.per_mean_points, seed)


def _group_by_pattern(frames):
    groups: dict[str, list] = {}
    for f in frames:
        groups.setdefault(f.pattern, []).append(f)
    return groups


def _reports_per_pattern(frames, predictions) -> dict[str, EvaluationReport]:
    """Per-pattern reports plus an overall row across all frames."""
    by_id = {f.frame_id: p for f, p in zip(frames, predictions)}
    reports = {}
    for pattern, group in _group_by_pattern(frames).items():
        traj = TrajectoryPrediction(
            np.array([f.frame_id for f in group]),
            np.array([by_id[f.frame_id] for f in group]),
            np.array([f.center_world for f in group]),
        )
        reports[pattern] = evaluate_trajectory(traj)
    overall = TrajectoryPrediction(
        np.array([f.frame_id for f in frames]),
        np.array(predictions),
        np.array([f.center_world for f in frames]),
    )
    reports["overall"] = evaluate_trajectory(overall)
    return reports


def _write_eval_outputs(config, frames, predictions, report_path, traj_path, fig_path, title):
    reports = _reports_per_pattern(frames, predictions)
    dataset_io.write_report_csv(report_path, reports)
    dataset_io.write_trajectory_csv(
        traj_path,
        ((f.frame_id, f.pattern, f.center_world, p) for f, p in zip(frames, predictions)),
    )
    if config.figures:
        per_pattern = {}
        for pattern, group in _group_by_pattern(frames).items():
            by_id = {f.frame_id: p for f, p in zip(frames, predictions)}
            per_pattern[pattern] = TrajectoryPrediction(
                np.array([f.frame_id for f in group]),
                np.array([by_id[f.frame_id] for f in group]),
                np.array([f.center_world for f in group]),
            )
        plotting.save_trajectory_figure(per_pattern, fig_path, title)
    return reports


def cmd_baseline(config: ExperimentConfig, mode: str = "known-P",
                 frames_path=None) -> dict[str, EvaluationReport]:
    """Classical PnP + triangulation localization on the test split.

    ``known-P`` uses the simulator cameras directly; ``estimated-P`` first
    estimates each camera's projection matrix by DLT from a held-out
    calibration subset of training frames (120 joint correspondences).
    """
    if mode not in ("known-P", "estimated-P"):
        raise ValueError(f"unknown baseline mode {mode!r}")
    frames = _load_frames(config, frames_path)
    split = split_dataset(frames, config.train_subjects, config.test_subjects)
    arena = config.arena()
    if mode == "known-P":
        mats = [cam.projection for cam in arena.cameras]
    else:
        if len(split.train) < 10:
            raise InvalidConfig("estimated-P needs >= 10 training frames for calibration")
        idx = np.linspace(0, len(split.train) - 1, 10).astype(int)
        calib = [split.train[i] for i in idx]
        mats = []
        for k in range(len(arena.cameras)):
            corr = [(f.joints_world[j], f.joints_pixel[k, j]) for f in calib for j in range(12)]
            mats.append(dlt_pnp(corr))
    predictions = [baseline_localize(mats, f.joints_pixel) for f in split.test]
    out = config.out_path()
    out.mkdir(parents=True, exist_ok=True)
    tag = mode.lower().replace("-", "_")
    reports = _write_eval_outputs(
        config, split.test, predictions,
        out / f"report_baseline_{tag}.csv",
        out / f"trajectory_baseline_{tag}.csv",
        out / f"trajectory_baseline_{tag}.png",
        f"baseline ({mode})",
    )
    print(f"baseline {mode}: {len(split.test)} frames, "
          f"overall mean error {reports['overall'].mean:.4f} m")
    return reports


def build_training_tensors(frames, config: ExperimentConfig, seed: int) -> TrainingPairTensor:
    """Assemble normalized network inputs/targets from frames.

    Inputs concatenate each camera's 12 pixel means scaled to [0, 1] by the
    image size; world targets stay in meters; pixel targets are the mean of
    each camera's 12 means, same normalized scale.
    """
    scale = np.array([config.image_width, config.image_height], dtype=float)
    inputs, t_world, t_pix = [], [], []
    for f in frames:
        batch = build_batch(f, per_mean_points=config.per_mean_points,
                            means_per_image=config.means_per_image, seed=seed)
        means = batch.per_camera_means / scale
        inputs.append(means.reshape(-1))
        t_world.append(batch.target)
        t_pix.append(means.mean(axis=1))
    return TrainingPairTensor(np.array(inputs), np.array(t_world), np.array(t_pix))


def cmd_train(config: ExperimentConfig, frames_path=None):
    """Train the localization network; writes checkpoint and loss history."""
    frames = _load_frames(config, frames_path)
    split = split_dataset(frames, config.train_subjects, config.test_subjects)
    train_data = build_training_tensors(split.train, config, config.train_seed)
    test_data = build_training_tensors(split.test, config, config.eval_seed)
    tc = TrainConfig(
        epochs=config.epochs, batch_size=config.batch_size,
        learning_rate=config.learning_rate, lambda_rec=config.lambda_rec,
        decoder=config.decoder, rec_joint=config.rec_gradient == "joint",
        seed=config.train_seed,
    )
    params, history = train(tc, train_data, test_data)
    paths = default_paths(config)
    paths["checkpoint"].parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(paths["checkpoint"], params, lambda_rec=config.lambda_rec,
                    seed=config.train_seed, epoch=len(history), decoder=config.decoder)
    dataset_io.write_loss_csv(paths["losses"], history)
    if config.figures:
        plotting.save_loss_figure(history, paths["loss_figure"])
    last = history[-1]
    print(f"trained {len(history)} epochs on {len(train_data)} frames; "
          f"final train L_loc {last.l_loc_train:.5f}, test L_loc {last.l_loc_test:.5f}")
    return params, history, paths["checkpoint"]


def predict_centers(params: NetworkParameters, config: ExperimentConfig, frames, seed: int) -> np.ndarray:
    data = build_training_tensors(frames, config, seed)
    y_hat, _, _ = encoder_forward(params, data.inputs)
    return y_hat


def cmd_eval(config: ExperimentConfig, checkpoint_path=None,
             frames_path=None) -> dict[str, EvaluationReport]:
    """Evaluate a checkpoint on the test split; writes report, trajectory,
    and figure; prints throughput."""
    paths = default_paths(config)
    ckpt = Path(checkpoint_path) if checkpoint_path else paths["checkpoint"]
    params, meta = load_checkpoint(ckpt)
    arena = config.arena()
    if meta["cameras"] != len(arena.cameras):
        raise CheckpointMismatch(
            f"checkpoint has {meta['cameras']} cameras, config has {len(arena.cameras)}")
    if meta["means_per_camera"] != config.means_per_image:
        raise CheckpointMismatch(
            f"checkpoint expects {meta['means_per_camera']} means per camera, "
            f"config provides {config.means_per_image}")
    frames = _load_frames(config, frames_path)
    split = split_dataset(frames, config.train_subjects, config.test_subjects)
    start = time.perf_counter()
    predictions = predict_centers(params, config, split.test, config.eval_seed)
    elapsed = time.perf_counter() - start
    reports = _write_eval_outputs(
        config, split.test, predictions,
        paths["eval_report"], paths["trajectory"], paths["eval_figure"], "localization network",
    )
    rate = len(split.test) / elapsed if elapsed > 0 else float("inf")
    print(f"evaluated {len(split.test)} frames in {elapsed:.2f} s ({rate:.0f} samples/s); "
          f"overall mean error {reports['overall'].mean:.4f} m")
    return reports


def _sweep_config(config: ExperimentConfig, axis: str, level: float) -> ExperimentConfig:
    if axis == "jitter":
        return with_overrides(config, camera_offset_max=float(level))
    if axis == "noise":
        return with_overrides(config, joint_noise_std=float(level))
    n = int(level)
    if not 1 <= n <= len(config.train_subjects):
        raise InvalidConfig(f"subject level {n} outside 1..{len(config.train_subjects)}")
    return with_overrides(config, train_subjects=config.train_subjects[:n])


def cmd_sweep(config: ExperimentConfig, axis: str, levels) -> list[tuple[float, str, float]]:
    """Regenerate, retrain, and evaluate per level; emits long-form CSV rows.

    Axes: ``jitter`` (camera offset 0-19 px), ``noise`` (joint Gaussian std
    0-19 px), ``subjects`` (training subject count).  Each level runs in
    its own output subdirectory with the same seeds.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}, expected one of {SWEEP_AXES}")
    base_out = config.out_path()
    rows: list[tuple[float, str, float]] = []
    for level in levels:
        sub = with_overrides(
            _sweep_config(config, axis, level),
            out_dir=str(base_out / f"sweep_{axis}" / f"level_{level:g}"),
        )
        cmd_generate(sub)
        cmd_train(sub)
        reports = cmd_eval(sub)
        overall = reports["overall"]
        for metric, value in zip(REPORT_COLUMNS, overall.as_row()):
            rows.append((float(level), metric, float(value)))
        print(f"sweep {axis} level {level:g}: overall mean error {overall.mean:.4f} m")
    base_out.mkdir(parents=True, exist_ok=True)
    dataset_io.write_sweep_csv(base_out / f"sweep_{axis}.csv", rows)
    if config.figures:
        plotting.save_sweep_figure(rows, axis, base_out / f"sweep_{axis}.png")
    return rows
