"""Homogeneous camera algebra: projection, PnP via normalized DLT, triangulation.

Conventions used throughout:

- World points are length-3 float arrays (meters); their homogeneous form
  appends a 1.
- Pixel points are length-2 float arrays (u, v); homogeneous form appends a 1.
- A camera maps world to pixel through ``s * [u, v, 1]^T = K [R|T] p_w``
  where ``s`` is the depth-dependent projective scale and ``P = K [R|T]``
  is the composite 3x4 projection matrix.
- The camera frame is OpenCV-style: x right, y down, z forward; a point is
  in front of the camera iff its projective scale is positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GeometryError",
    "BehindCamera",
    "RankDeficient",
    "InsufficientCorrespondences",
    "DegenerateConfiguration",
    "DegenerateBaseline",
    "SolutionAtInfinity",
    "FrameLocalizationFailed",
    "CameraModel",
    "project",
    "solve_homogeneous",
    "dlt_pnp",
    "triangulate",
    "baseline_localize",
    "camera_center",
    "normalize_projection",
]

_ROTATION_TOL = 1e-9
_SCALE_EPS = 1e-12
_NULLSPACE_GAP = 1e-12
_BASELINE_EPS = 1e-9


class GeometryError(Exception):
    """Base class for geometric failure modes."""


class BehindCamera(GeometryError):
    """Projective scale is non-positive: the point is behind the camera."""


class RankDeficient(GeometryError):
    """The two smallest singular values coincide; the null space is ambiguous."""


class InsufficientCorrespondences(GeometryError):
    """Fewer than the minimum 6 world/pixel correspondences were supplied."""


class DegenerateConfiguration(GeometryError):
    """The correspondence set does not determine a unique projection matrix."""


class DegenerateBaseline(GeometryError):
    """Camera centers coincide; rays cannot intersect at a unique point."""


class SolutionAtInfinity(GeometryError):
    """Triangulated homogeneous point has a vanishing fourth component."""


class FrameLocalizationFailed(GeometryError):
    """Too many joints failed to triangulate to localize the frame."""


def _as_float_array(x, shape, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return a


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera: intrinsics K, rotation R, translation T, image size.

    K must be upper triangular with a positive diagonal; R must be a proper
    rotation (orthonormal, determinant +1, tolerance 1e-9).
    """

    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    image_width: int = 640
    image_height: int = 480

    def __post_init__(self):
        k = _as_float_array(self.intrinsics, (3, 3), "intrinsics")
        r = _as_float_array(self.rotation, (3, 3), "rotation")
        t = _as_float_array(self.translation, (3,), "translation")
        if np.any(np.abs(k[np.tril_indices(3, -1)]) > 0):
            raise ValueError("intrinsics must be upper triangular")
        if np.any(np.diag(k) <= 0):
            raise ValueError("intrinsics diagonal must be positive")
        if np.max(np.abs(r @ r.T - np.eye(3))) > _ROTATION_TOL:
            raise ValueError("rotation must be orthonormal")
        if abs(np.linalg.det(r) - 1.0) > _ROTATION_TOL:
            raise ValueError("rotation must have determinant +1")
        for a in (k, r, t):
            a.setflags(write=False)
        object.__setattr__(self, "intrinsics", k)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @property
    def projection(self) -> np.ndarray:
        """Composite 3x4 matrix K [R|T]."""
        rt = np.hstack([self.rotation, self.translation[:, None]])
        return self.intrinsics @ rt

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates (-R^T T)."""
        return -self.rotation.T @ self.translation


def project(camera: CameraModel, point) -> tuple[np.ndarray, float]:
    """Project a world point; returns (pixel, scale).

    Raises BehindCamera when the projective scale is <= 1e-12, i.e. the
    point is on or behind the principal plane.
    """
    p = _as_float_array(point, (3,), "point")
    x = camera.projection @ np.append(p, 1.0)
    s = float(x[2])
    if s <= _SCALE_EPS:
        raise BehindCamera(f"projective scale {s:g} <= {_SCALE_EPS:g}")
    return x[:2] / s, s


def _jacobi_eigh(gram: np.ndarray, tol: float = 1e-14, max_sweeps: int = 64):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns eigenvalues (ascending) and the matching eigenvector columns.
    Adequate and fully deterministic for the n <= 12 systems produced by
    DLT and triangulation; convergence threshold 1e-14 relative to the
    Frobenius norm.
    """
    a = np.array(gram, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tol * scale * 1e-3:
                    continue
                # Symmetric Schur rotation zeroing a[p, q].
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    w = np.diag(a).copy()
    order = np.argsort(w)
    return w[order], v[:, order]


def solve_homogeneous(a) -> np.ndarray:
    """Unit-norm x minimizing ||A x||_2, via Jacobi on the Gram matrix A^T A.

    The solution is the right singular vector of the smallest singular
    value, sign-normalized so its largest-magnitude component is positive.
    Raises RankDeficient when the two smallest singular values agree to
    better than 1e-12 of the largest (ambiguous null space).
    """
    mat = np.asarray(a, dtype=float)
    if mat.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    m, n = mat.shape
    if m < n - 1:
        raise ValueError(f"need at least {n - 1} rows for a {n}-column system")
    gram = mat.T @ mat
    evals, evecs = _jacobi_eigh(gram)
    sv = np.sqrt(np.clip(evals, 0.0, None))
    if sv[-1] <= 0.0:
        raise RankDeficient("zero matrix: every vector is a null vector")
    if (sv[1] - sv[0]) / sv[-1] < _NULLSPACE_GAP:
        raise RankDeficient(
            f"smallest singular values {sv[0]:.3e}, {sv[1]:.3e} are indistinguishable"
        )
    x = evecs[:, 0]
    pivot = int(np.argmax(np.abs(x)))
    if x[pivot] < 0:
        x = -x
    return x / np.linalg.norm(x)


def _hartley_pixels(points: np.ndarray):
    centroid = points.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((points - centroid) ** 2, axis=1)))
    scale = np.sqrt(2.0) / rms if rms > 0 else 1.0
    t = np.array(
        [
            [scale, 0.0, -scale * centroid[0]],
            [0.0, scale, -scale * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )
    return (points - centroid) * scale, t


def _hartley_world(points: np.ndarray):
    centroid = points.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((points - centroid) ** 2, axis=1)))
    scale = np.sqrt(3.0) / rms if rms > 0 else 1.0
    t = np.eye(4)
    t[:3, :3] *= scale
    t[:3, 3] = -scale * centroid
    return (points - centroid) * scale, t


def normalize_projection(p: np.ndarray) -> np.ndarray:
    """Scale to unit Frobenius norm with the largest-magnitude entry positive."""
    p = np.asarray(p, dtype=float)
    norm = np.linalg.norm(p)
    if norm == 0:
        raise ValueError("cannot normalize a zero matrix")
    p = p / norm
    flat = np.abs(p).argmax()
    if p.flat[flat] < 0:
        p = -p
    return p


def dlt_pnp(correspondences) -> np.ndarray:
    """Estimate a 3x4 projection matrix from (world, pixel) correspondences.

    Inputs are Hartley-normalized (zero centroid, RMS distance sqrt(2) in
    pixels and sqrt(3) in meters) before building the standard
    two-rows-per-point linear system, and denormalized afterwards.  The
    result has unit Frobenius norm with its largest entry positive.
    """
    pairs = list(correspondences)
    if len(pairs) < 6:
        raise InsufficientCorrespondences(f"need >= 6 correspondences, got {len(pairs)}")
    world = np.array([_as_float_array(w, (3,), "world point") for w, _ in pairs])
    pixel = np.array([_as_float_array(px, (2,), "pixel point") for _, px in pairs])
    world_n, t_world = _hartley_world(world)
    pixel_n, t_pixel = _hartley_pixels(pixel)

    rows = np.zeros((2 * len(pairs), 12))
    for i, (w, px) in enumerate(zip(world_n, pixel_n)):
        wh = np.append(w, 1.0)
        u, v = px
        rows[2 * i, 0:4] = wh
        rows[2 * i, 8:12] = -u * wh
        rows[2 * i + 1, 4:8] = wh
        rows[2 * i + 1, 8:12] = -v * wh
    try:
        p_vec = solve_homogeneous(rows)
    except RankDeficient as exc:
        raise DegenerateConfiguration(str(exc)) from exc
    p_norm = p_vec.reshape(3, 4)
    p = np.linalg.inv(t_pixel) @ p_norm @ t_world
    return normalize_projection(p)


def camera_center(p: np.ndarray) -> np.ndarray:
    """World-space center of a 3x4 projection matrix (its null direction)."""
    c = solve_homogeneous(np.asarray(p, dtype=float))
    if abs(c[3]) < _SCALE_EPS:
        raise SolutionAtInfinity("camera center at infinity")
    return c[:3] / c[3]


def triangulate(observations) -> np.ndarray:
    """Recover a world point from >= 2 (projection matrix, pixel) observations.

    Stacks, per camera, the two independent rows of the cross product of
    the homogeneous pixel with P, solves the homogeneous system, and
    dehomogenizes by the fourth component.
    """
    obs = [(np.asarray(p, dtype=float), _as_float_array(px, (2,), "pixel")) for p, px in observations]
    if len(obs) < 2:
        raise ValueError("need at least two observations")
    centers = [camera_center(p) for p, _ in obs]
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            if np.linalg.norm(centers[i] - centers[j]) < _BASELINE_EPS:
                raise DegenerateBaseline(f"cameras {i} and {j} share a center")
    rows = []
    for p, (u, v) in obs:
        # Rows 1 and 2 of [u, v, 1] x P; the third is linearly dependent.
        rows.append(v * p[2] - p[1])
        rows.append(p[0] - u * p[2])
    x = solve_homogeneous(np.array(rows))
    if abs(x[3]) < _SCALE_EPS:
        raise SolutionAtInfinity("triangulated point at infinity")
    return x[:3] / x[3]


def baseline_localize(cameras, joints_pixel, max_failed_joints: int = 6) -> np.ndarray:
    """Classical per-frame localization: triangulate each joint, average.

    ``cameras`` may mix CameraModel instances and raw 3x4 projection
    matrices (e.g. DLT estimates).  ``joints_pixel`` is (n_cameras,
    n_joints, 2).  Joints whose triangulation fails are skipped; the frame
    fails once more than ``max_failed_joints`` are lost.
    """
    mats = [c.projection if isinstance(c, CameraModel) else np.asarray(c, dtype=float) for c in cameras]
    px = np.asarray(joints_pixel, dtype=float)
    if px.ndim != 3 or px.shape[0] != len(mats) or px.shape[2] != 2:
        raise ValueError("joints_pixel must be (n_cameras, n_joints, 2)")
    points = []
    failures: list[GeometryError] = []
    for j in range(px.shape[1]):
        try:
            points.append(triangulate([(m, px[k, j]) for k, m in enumerate(mats)]))
        except GeometryError as exc:
            failures.append(exc)
    if len(failures) > max_failed_joints:
        raise FrameLocalizationFailed(
            f"{len(failures)} of {px.shape[1]} joints failed: {failures[0]}"
        )
    return np.mean(points, axis=0)
