"""Experiment configuration: flat key=value text files.

One ``key = value`` pair per line, ``#`` starts a comment, blank lines are
ignored.  Unknown keys are rejected so typos fail loudly.  Every command
is a pure function of (config, seeds, input files), so the config carries
all geometry, noise, estimator, and training settings.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .simulator import PATTERNS, ArenaSpec, NoiseSpec, WalkPattern, default_cameras

__all__ = ["InvalidConfig", "ExperimentConfig", "parse_config", "load_config", "with_overrides"]


class InvalidConfig(Exception):
    pass


def _int_list(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(t) for t in text.split(","))


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("on", "true", "1", "yes"):
        return True
    if t in ("off", "false", "0", "no"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    # Arena and rig
    arena_width: float = 10.0
    arena_depth: float = 10.0
    image_width: int = 640
    image_height: int = 480
    camera_height: float = 2.4
    camera_pitch_deg: float = 15.0
    # Subjects and walking protocol
    train_subjects: tuple[int, ...] = (1, 2, 3, 4)
    test_subjects: tuple[int, ...] = (8, 9)
    train_duration_s: float = 60.0
    test_duration_s: float = 30.0
    frame_rate_hz: float = 15.0
    test_patterns: tuple[str, ...] = PATTERNS
    # Observation noise
    camera_offset_max: float = 0.0
    joint_noise_std: float = 0.0
    noise_seed: int = 0
    # Mean-estimator settings
    per_mean_points: int = 30
    means_per_image: int = 12
    # Network training
    lambda_rec: float = 1.0
    learning_rate: float = 1e-3
    batch_size: int = 128
    epochs: int = 60
    decoder: bool = True
    rec_gradient: str = "joint"  # or "alternating"
    # Seeds and output
    master_seed: int = 0
    train_seed: int = 0
    eval_seed: int = 0
    out_dir: str = "out"
    figures: bool = True

    def __post_init__(self):
        overlap = set(self.train_subjects) & set(self.test_subjects)
        if overlap:
            raise InvalidConfig(f"subjects {sorted(overlap)} are in both train and test")
        if not self.train_subjects or not self.test_subjects:
            raise InvalidConfig("need at least one train and one test subject")
        for p in self.test_patterns:
            if p not in PATTERNS:
                raise InvalidConfig(f"unknown pattern {p!r}")
        if self.rec_gradient not in ("joint", "alternating"):
            raise InvalidConfig(f"rec_gradient must be joint or alternating, got {self.rec_gradient!r}")
        if min(self.train_duration_s, self.test_duration_s, self.frame_rate_hz) <= 0:
            raise InvalidConfig("durations and frame rate must be positive")
        if self.camera_offset_max < 0 or self.joint_noise_std < 0:
            raise InvalidConfig("noise amplitudes must be non-negative")

    def arena(self) -> ArenaSpec:
        cams = default_cameras(self.arena_width, self.arena_depth,
                               self.image_width, self.image_height,
                               self.camera_height, self.camera_pitch_deg)
        return ArenaSpec(self.arena_width, self.arena_depth, cams)

    def noise(self) -> NoiseSpec:
        return NoiseSpec(self.camera_offset_max, self.joint_noise_std, self.noise_seed)

    def passes(self) -> list[tuple[int, WalkPattern]]:
        """Dataset recipe: train subjects walk randomly, test subjects walk
        every configured pattern."""
        out = [(s, WalkPattern("random_walk", self.train_duration_s, self.frame_rate_hz))
               for s in self.train_subjects]
        for s in self.test_subjects:
            for kind in self.test_patterns:
                out.append((s, WalkPattern(kind, self.test_duration_s, self.frame_rate_hz)))
        return out

    def out_path(self) -> Path:
        return Path(self.out_dir)


_PARSERS = {
    "arena_width": float, "arena_depth": float,
    "image_width": int, "image_height": int,
    "camera_height": float, "camera_pitch_deg": float,
    "train_subjects": _int_list, "test_subjects": _int_list,
    "train_duration_s": float, "test_duration_s": float, "frame_rate_hz": float,
    "test_patterns": _str_list,
    "camera_offset_max": float, "joint_noise_std": float, "noise_seed": int,
    "per_mean_points": int, "means_per_image": int,
    "lambda_rec": float, "learning_rate": float, "batch_size": int, "epochs": int,
    "decoder": _bool, "rec_gradient": str,
    "master_seed": int, "train_seed": int, "eval_seed": int,
    "out_dir": str, "figures": _bool,
}

assert set(_PARSERS) == {f.name for f in fields(ExperimentConfig)}


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _PARSERS:
            raise InvalidConfig(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](value.strip())
        except ValueError as exc:
            raise InvalidConfig(f"line {lineno}: bad value for {key}: {exc}") from exc
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def with_overrides(config: ExperimentConfig, **kwargs) -> ExperimentConfig:
    return replace(config, **kwargs)
