"""Figure rendering for the report paths (Agg backend, deterministic PNGs).

Figures accompany the CSV outputs; the CSVs remain the canonical artifact.
PNG metadata is stripped so identical runs produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_SAVE = dict(dpi=110, metadata={"Software": None})


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def save_trajectory_figure(per_pattern, path, title: str) -> None:
    """Top-down ground truth vs prediction overlay, one panel per pattern."""
    patterns = list(per_pattern)
    fig, axes = plt.subplots(1, len(patterns), figsize=(4.2 * len(patterns), 4.2), squeeze=False)
    for ax, name in zip(axes[0], patterns):
        traj = per_pattern[name]
        ax.plot(traj.ground_truth[:, 0], traj.ground_truth[:, 1], "-", color="0.4", lw=1.2, label="ground truth")
        ax.plot(traj.predicted[:, 0], traj.predicted[:, 1], "-", color="tab:red", lw=0.9, label="prediction")
        ax.set_title(name)
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_aspect("equal")
        ax.legend(loc="upper right", fontsize=8)
    fig.suptitle(title)
    _finish(fig, path)


def save_loss_figure(history, path) -> None:
    """Training and testing loss curves over epochs."""
    epochs = [row.epoch for row in history]
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    axes[0].plot(epochs, [r.l_loc_train for r in history], label="train")
    axes[0].plot(epochs, [r.l_loc_test for r in history], label="test")
    axes[0].set_title("localization loss")
    axes[1].plot(epochs, [r.l_rec_train for r in history], label="train")
    axes[1].plot(epochs, [r.l_rec_test for r in history], label="test")
    axes[1].set_title("reconstruction loss")
    for ax in axes:
        ax.set_xlabel("epoch")
        ax.set_yscale("log")
        ax.legend()
    _finish(fig, path)


def save_sweep_figure(rows, axis_name: str, path) -> None:
    """Accuracy metrics against the swept level."""
    by_metric: dict[str, list[tuple[float, float]]] = {}
    for level, metric, value in rows:
        by_metric.setdefault(metric, []).append((level, value))
    fig, ax = plt.subplots(figsize=(6, 4))
    for metric, pts in by_metric.items():
        if not metric.startswith("acc_"):
            continue
        pts = sorted(pts)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                label=metric.replace("acc_", "acc@") + "m")
    ax.set_xlabel(axis_name)
    ax.set_ylabel("accuracy [%]")
    ax.set_ylim(0, 102)
    ax.legend()
    _finish(fig, path)
