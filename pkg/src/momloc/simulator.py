"""Synthetic multi-camera walking simulator.

Generates deterministic walking trajectories in a rectangular arena, an
articulated 12-joint body around each trajectory point, per-camera pixel
observations of the joints, and two perturbation models: a per-frame
whole-image camera offset (jitter) and per-joint Gaussian pixel noise.

World frame: x and y span the arena floor, z is up, units are meters.
The default rig is two cameras on opposite arena corners at 2.4 m height,
pitched down 15 degrees, with the focal length picked so the walkable
volume fills about 80% of a 640x480 frame.

The body model is a deliberately crude sinusoid gait: joints sit at
stature-scaled canonical offsets from the body center and the arm/leg
joints swing along the walking direction with amplitude 0.18 m.  After
placement the joint cloud is re-centered so that the mean of the 12 joints
equals the requested center exactly; that mean is the ground-truth
location every downstream consumer uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraModel, project
from .seeding import derive_rng

__all__ = [
    "PATTERNS",
    "JOINT_NAMES",
    "BONES",
    "WalkPattern",
    "ArenaSpec",
    "NoiseSpec",
    "SkeletonFrame",
    "default_cameras",
    "default_arena",
    "subject_stature",
    "center_height",
    "generate_trajectory",
    "articulate",
    "render_frame",
    "sample_observation_points",
    "skeleton_centroid",
    "generate_dataset",
]

PATTERNS = ("random_walk", "cross_walk", "square_walk")

JOINT_NAMES = (
    "l_shoulder", "r_shoulder",
    "l_elbow", "r_elbow",
    "l_wrist", "r_wrist",
    "l_hip", "r_hip",
    "l_knee", "r_knee",
    "l_ankle", "r_ankle",
)

# Skeleton tree: 12 joints, 11 bones.
BONES = (
    (0, 1),            # shoulder bar
    (0, 2), (2, 4),    # left arm
    (1, 3), (3, 5),    # right arm
    (0, 6), (1, 7),    # torso sides
    (6, 8), (8, 10),   # left leg
    (7, 9), (9, 11),   # right leg
)

# Canonical joint offsets as fractions of stature: (height, lateral, swing gain).
# Lateral is signed per side; swing gain scales the 0.18 m gait amplitude.
_JOINT_TABLE = (
    (0.82, 0.115, 0.0),   # shoulders
    (0.63, 0.135, 0.5),   # elbows
    (0.44, 0.140, 1.0),   # wrists
    (0.52, 0.085, 0.0),   # hips
    (0.28, 0.085, 0.5),   # knees
    (0.04, 0.090, 1.0),   # ankles
)
_SWING_AMPLITUDE = 0.18   # meters
_STRIDE_LENGTH = 1.3      # meters per full gait cycle
_WALK_MARGIN = 1.5        # trajectory clearance from arena walls, meters
_BODY_REACH = 0.35        # how far joints may stick out past the trajectory box
_CENTER_FRAC = sum(row[0] for row in _JOINT_TABLE) / len(_JOINT_TABLE)

_STATURE_TAG = 0x5747     # rng namespace for the per-subject stature draw
_TRAJ_TAG = 1
_NOISE_TAG = 2


@dataclass(frozen=True)
class WalkPattern:
    """One walking assignment: pattern kind, duration, and frame rate."""

    kind: str
    duration_s: float
    step_rate_hz: float = 15.0

    def __post_init__(self):
        if self.kind not in PATTERNS:
            raise ValueError(f"unknown pattern {self.kind!r}, expected one of {PATTERNS}")
        if self.duration_s <= 0 or self.step_rate_hz <= 0:
            raise ValueError("duration and step rate must be positive")

    @property
    def frame_count(self) -> int:
        return int(round(self.duration_s * self.step_rate_hz))


@dataclass(frozen=True)
class ArenaSpec:
    """Rectangular arena and its camera rig (at least two cameras)."""

    width: float = 10.0
    depth: float = 10.0
    cameras: tuple[CameraModel, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.width <= 0 or self.depth <= 0:
            raise ValueError("arena dimensions must be positive")
        if len(self.cameras) < 2:
            raise ValueError("need at least two cameras")


@dataclass(frozen=True)
class NoiseSpec:
    """Observation perturbations: camera jitter and joint Gaussian noise.

    ``camera_offset_max`` is the amplitude of a per-frame uniform offset
    shared by all joints seen by one camera (whole-image shift);
    ``joint_noise_std`` is the std of independent per-joint Gaussian pixel
    noise.  Both in pixels, both may be zero.
    """

    camera_offset_max: float = 0.0
    joint_noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.camera_offset_max < 0 or self.joint_noise_std < 0:
            raise ValueError("noise amplitudes must be non-negative")


@dataclass(frozen=True)
class SkeletonFrame:
    """One time step: world joints, their pixel projections, and metadata.

    ``joints_pixel`` carries the observed (noisy) pixels, shape
    (n_cameras, 12, 2); ``joints_pixel_exact`` the noise-free projections
    kept alongside for oracle tests; ``in_bounds`` flags exact projections
    inside the image rectangle.
    """

    frame_id: int
    time_s: float
    subject_id: int
    pattern: str
    joints_world: np.ndarray
    center_world: np.ndarray
    joints_pixel: np.ndarray
    joints_pixel_exact: np.ndarray
    in_bounds: np.ndarray

    def __post_init__(self):
        for name in ("joints_world", "center_world", "joints_pixel", "joints_pixel_exact", "in_bounds"):
            getattr(self, name).setflags(write=False)


def _look_rotation(position: np.ndarray, target_xy: np.ndarray, pitch_deg: float) -> np.ndarray:
    """Rotation whose camera z axis points at the horizontal bearing of
    target_xy, pitched down by pitch_deg; x right, y down."""
    bearing = target_xy - position[:2]
    bearing = bearing / np.linalg.norm(bearing)
    pitch = math.radians(pitch_deg)
    forward = np.array([bearing[0] * math.cos(pitch), bearing[1] * math.cos(pitch), -math.sin(pitch)])
    right = np.cross(forward, np.array([0.0, 0.0, 1.0]))
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    return np.vstack([right, down, forward])


def _fit_focal(position, rotation, width, depth, image_w, image_h, fill=0.8) -> float:
    """Largest focal length keeping the walkable volume within ``fill`` of
    the image in both axes, for a camera at ``position`` with ``rotation``."""
    lo = _WALK_MARGIN - _BODY_REACH
    xs = (lo, width - lo)
    ys = (lo, depth - lo)
    zs = (0.0, 1.65)
    max_tx = max_ty = 0.0
    for x in xs:
        for y in ys:
            for z in zs:
                p_cam = rotation @ (np.array([x, y, z]) - position)
                if p_cam[2] <= 0.1:
                    continue
                max_tx = max(max_tx, abs(p_cam[0] / p_cam[2]))
                max_ty = max(max_ty, abs(p_cam[1] / p_cam[2]))
    return min(fill * (image_w / 2) / max_tx, fill * (image_h / 2) / max_ty)


def default_cameras(width: float = 10.0, depth: float = 10.0,
                    image_w: int = 640, image_h: int = 480,
                    height: float = 2.4, pitch_deg: float = 15.0) -> tuple[CameraModel, CameraModel]:
    """Two-camera rig on opposite arena corners, both aimed at the center."""
    center_xy = np.array([width / 2.0, depth / 2.0])
    cams = []
    for corner in (np.array([0.0, 0.0, height]), np.array([width, depth, height])):
        r = _look_rotation(corner, center_xy, pitch_deg)
        f = math.floor(_fit_focal(corner, r, width, depth, image_w, image_h))
        k = np.array([[f, 0.0, image_w / 2.0], [0.0, f, image_h / 2.0], [0.0, 0.0, 1.0]])
        cams.append(CameraModel(k, r, -r @ corner, image_w, image_h))
    return tuple(cams)


def default_arena(width: float = 10.0, depth: float = 10.0) -> ArenaSpec:
    return ArenaSpec(width, depth, default_cameras(width, depth))


def subject_stature(subject_id: int) -> float:
    """Deterministic per-subject stature, uniform over 1.55-1.90 m."""
    u = derive_rng(_STATURE_TAG, subject_id).uniform()
    return 1.55 + 0.35 * u


def center_height(subject_id: int) -> float:
    """Resting height of the 12-joint mean for a subject."""
    return _CENTER_FRAC * subject_stature(subject_id)


def _walk_box(arena: ArenaSpec):
    return (
        np.array([_WALK_MARGIN, _WALK_MARGIN]),
        np.array([arena.width - _WALK_MARGIN, arena.depth - _WALK_MARGIN]),
    )


def _random_walk(pattern: WalkPattern, arena: ArenaSpec, rng: np.random.Generator) -> np.ndarray:
    lo, hi = _walk_box(arena)
    center = (lo + hi) / 2.0
    dt = 1.0 / pattern.step_rate_hz
    n = pattern.frame_count
    pos = rng.uniform(lo + 0.5, hi - 0.5)
    heading = rng.uniform(0.0, 2.0 * math.pi)
    speed = rng.uniform(0.8, 1.4)
    out = np.empty((n, 2))
    for i in range(n):
        speed = float(np.clip(speed + rng.normal(0.0, 0.08), 0.8, 1.4))
        heading += rng.normal(0.0, 0.25)
        step = speed * dt * np.array([math.cos(heading), math.sin(heading)])
        cand = pos + step
        if np.any(cand < lo) or np.any(cand > hi):
            # Steer back toward the middle instead of hugging the wall.
            heading = math.atan2(*(center - pos)[::-1]) + rng.normal(0.0, 0.3)
            cand = pos + speed * dt * np.array([math.cos(heading), math.sin(heading)])
            cand = np.clip(cand, lo, hi)
        pos = cand
        out[i] = pos
    return out


def _polyline_walk(vertices: list[np.ndarray], n: int) -> np.ndarray:
    """March n positions along a piecewise path at constant speed.  Gaps
    between disconnected legs are jumped, not walked."""
    segs = [(a, b, float(np.linalg.norm(b - a))) for a, b in vertices]
    total = sum(s[2] for s in segs)
    out = np.empty((n, 2))
    for i in range(n):
        d = total * i / n
        for si, (a, b, length) in enumerate(segs):
            if d <= length or si == len(segs) - 1:
                t = 0.0 if length == 0 else min(d / length, 1.0)
                out[i] = a + t * (b - a)
                break
            d -= length
    return out


def _cross_walk(pattern: WalkPattern, arena: ArenaSpec) -> np.ndarray:
    lo, hi = _walk_box(arena)
    cx, cy = (lo + hi) / 2.0
    legs = [
        (np.array([lo[0], cy]), np.array([hi[0], cy])),
        (np.array([cx, lo[1]]), np.array([cx, hi[1]])),
    ]
    return _polyline_walk(legs, pattern.frame_count)


def _square_walk(pattern: WalkPattern, arena: ArenaSpec) -> np.ndarray:
    side = min(arena.width, arena.depth) - 2.0 * (_WALK_MARGIN + 0.5)
    cx, cy = arena.width / 2.0, arena.depth / 2.0
    h = side / 2.0
    corners = [
        np.array([cx - h, cy - h]),
        np.array([cx + h, cy - h]),
        np.array([cx + h, cy + h]),
        np.array([cx - h, cy + h]),
    ]
    loop = [(corners[i], corners[(i + 1) % 4]) for i in range(4)]
    return _polyline_walk(loop * 2, pattern.frame_count)  # perimeter twice


def generate_trajectory(pattern: WalkPattern, arena: ArenaSpec, seed: int) -> np.ndarray:
    """Ground-plane body-center path, shape (frames, 2).  Same seed, same path."""
    if pattern.kind == "random_walk":
        return _random_walk(pattern, arena, derive_rng(_TRAJ_TAG, seed))
    if pattern.kind == "cross_walk":
        return _cross_walk(pattern, arena)
    return _square_walk(pattern, arena)


def articulate(center, phase: float, subject_id: int, heading: float = 0.0) -> np.ndarray:
    """Place the 12 joints around a body center at a given gait phase.

    Left-side limbs swing with sin(phase), right-side with sin(phase + pi);
    the joint cloud is re-centered so its mean equals ``center`` exactly.
    """
    center = np.asarray(center, dtype=float)
    h = subject_stature(subject_id)
    fwd = np.array([math.cos(heading), math.sin(heading), 0.0])
    lat = np.array([-math.sin(heading), math.cos(heading), 0.0])
    up = np.array([0.0, 0.0, 1.0])
    swing = _SWING_AMPLITUDE * math.sin(phase)
    joints = np.empty((12, 3))
    for row, (z_frac, lat_frac, gain) in enumerate(_JOINT_TABLE):
        for side, sign in ((0, 1.0), (1, -1.0)):  # left, right
            arm = row < 3
            # Opposite arms and legs swing together: left arm with right leg.
            limb_swing = gain * swing * (sign if not arm else -sign)
            joints[2 * row + side] = (
                (z_frac - _CENTER_FRAC) * h * up
                + sign * lat_frac * h * lat
                + limb_swing * fwd
            )
    # Re-center twice: the second pass removes residual float dust.
    joints += center - joints.mean(axis=0)
    joints += center - joints.mean(axis=0)
    return joints


def render_frame(joints_world, arena: ArenaSpec, noise: NoiseSpec, frame_seed: int,
                 frame_id: int = 0, time_s: float = 0.0, subject_id: int = 0,
                 pattern: str = "random_walk") -> SkeletonFrame:
    """Project joints into every camera and apply the noise model.

    Per camera: one uniform offset in [-a, a]^2 shared by all 12 joints
    (whole-image jitter), then independent Gaussian noise per joint
    coordinate.  Noise-free projections are retained alongside.
    """
    joints = np.asarray(joints_world, dtype=float)
    rng = derive_rng(_NOISE_TAG, noise.seed, frame_seed)
    k = len(arena.cameras)
    exact = np.empty((k, 12, 2))
    noisy = np.empty((k, 12, 2))
    bounds = np.empty((k, 12), dtype=bool)
    for ci, cam in enumerate(arena.cameras):
        for j in range(12):
            exact[ci, j], _ = project(cam, joints[j])
        a = noise.camera_offset_max
        offset = rng.uniform(-a, a, size=2)
        jitter = rng.normal(0.0, noise.joint_noise_std, size=(12, 2)) if noise.joint_noise_std > 0 else 0.0
        noisy[ci] = exact[ci] + offset + jitter
        bounds[ci] = (
            (exact[ci, :, 0] >= 0) & (exact[ci, :, 0] <= cam.image_width)
            & (exact[ci, :, 1] >= 0) & (exact[ci, :, 1] <= cam.image_height)
        )
    center = joints.mean(axis=0)
    return SkeletonFrame(frame_id, time_s, subject_id, pattern,
                         joints.copy(), center, noisy, exact, bounds)


def sample_observation_points(frame: SkeletonFrame, camera_index: int,
                              count: int, seed: int) -> np.ndarray:
    """Uniform points along the skeleton bones of one camera view.

    Bones are picked with probability proportional to their pixel length,
    positions uniform along the bone.  A fully collapsed skeleton yields
    ``count`` copies of the single pixel.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    joints = frame.joints_pixel[camera_index]
    a = joints[[b[0] for b in BONES]]
    b = joints[[b[1] for b in BONES]]
    lengths = np.linalg.norm(b - a, axis=1)
    total = lengths.sum()
    if total <= 1e-12:
        return np.tile(joints[0], (count, 1))
    rng = derive_rng(seed)
    idx = rng.choice(len(BONES), size=count, p=lengths / total)
    t = rng.uniform(size=count)
    return a[idx] + t[:, None] * (b[idx] - a[idx])


def skeleton_centroid(joint_pixels) -> np.ndarray:
    """Length-weighted centroid of the skeleton polyline (closed form).

    This is the limit of the mean of uniformly sampled observation points.
    """
    joints = np.asarray(joint_pixels, dtype=float)
    a = joints[[b[0] for b in BONES]]
    b = joints[[b[1] for b in BONES]]
    lengths = np.linalg.norm(b - a, axis=1)
    total = lengths.sum()
    if total <= 1e-12:
        return joints[0].copy()
    midpoints = (a + b) / 2.0
    return (lengths[:, None] * midpoints).sum(axis=0) / total


def generate_dataset(arena: ArenaSpec, noise: NoiseSpec, passes, master_seed: int,
                     start_frame_id: int = 0) -> list[SkeletonFrame]:
    """Render all frames for a list of (subject_id, WalkPattern) passes.

    A pure function of its arguments: trajectories, gait phases, and noise
    draws are all keyed off ``master_seed`` plus stable per-pass indices.
    """
    frames: list[SkeletonFrame] = []
    frame_id = start_frame_id
    for subject_id, pattern in passes:
        pattern_idx = PATTERNS.index(pattern.kind)
        traj = generate_trajectory(pattern, arena, seed=_pass_seed(master_seed, subject_id, pattern_idx))
        z = center_height(subject_id)
        dt = 1.0 / pattern.step_rate_hz
        phase = 0.0
        heading = 0.0
        prev = traj[0]
        for i, xy in enumerate(traj):
            step = xy - prev
            dist = float(np.linalg.norm(step))
            if dist > 1e-12:
                heading = math.atan2(step[1], step[0])
            # Cap the phase advance across path discontinuities.
            phase += 2.0 * math.pi * min(dist, 0.2) / _STRIDE_LENGTH
            prev = xy
            joints = articulate(np.array([xy[0], xy[1], z]), phase, subject_id, heading)
            frames.append(render_frame(
                joints, arena, noise,
                frame_seed=frame_id,
                frame_id=frame_id,
                time_s=i * dt,
                subject_id=subject_id,
                pattern=pattern.kind,
            ))
            frame_id += 1
    return frames


def _pass_seed(master_seed: int, subject_id: int, pattern_idx: int) -> int:
    # Collapse the pass key into one int so generate_trajectory keeps an
    # (pattern, arena, seed) signature.
    return int(np.random.SeedSequence([_TRAJ_TAG, master_seed, subject_id, pattern_idx]).generate_state(1)[0])
