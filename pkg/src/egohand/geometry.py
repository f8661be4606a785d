"""Camera and coordinate-frame math shared by the rest of the package.

Conventions
-----------
* 3D quantities are in millimeters, 2D quantities in pixels.
* Extrinsics map world to camera: ``X_cam = R @ X_world + t``.
* Pixel ``(u, v)`` with integer coordinates is a pixel center; ``+u`` right,
  ``+v`` down, ``+z`` in front of the camera.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FrameMismatch, JointCountMismatch, NonPositiveDepth

log = logging.getLogger(__name__)

WORLD = "world"
DEFAULT_NUM_JOINTS = 21
MIN_DEPTH_MM = 1e-9
ROTATION_TOL = 1e-9


def camera_frame(view_id: str) -> str:
    return f"camera:{view_id}"


def is_camera_frame(frame: str) -> bool:
    return frame.startswith("camera:")


def _frozen(a, shape=None) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise DataError(f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError("non-finite component")
    arr.setflags(write=False)
    return arr


def rotation_error(R: np.ndarray) -> float:
    """Largest deviation of ``R`` from a proper rotation (orthonormality or det)."""
    R = np.asarray(R, dtype=np.float64)
    ortho = np.max(np.abs(R.T @ R - np.eye(3)))
    return float(max(ortho, abs(np.linalg.det(R) - 1.0)))


def is_rotation(R: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    return rotation_error(R) <= tol


@dataclass(frozen=True, eq=False)
class Skeleton:
    """``J x 3`` joint positions (mm) tagged with the frame they live in."""

    joints: np.ndarray
    frame: str = WORLD

    def __post_init__(self):
        joints = _frozen(self.joints)
        if joints.ndim != 2 or joints.shape[1] != 3 or joints.shape[0] < 1:
            raise DataError(f"joints must be J x 3 with J >= 1, got {joints.shape}")
        object.__setattr__(self, "joints", joints)

    @property
    def num_joints(self) -> int:
        return self.joints.shape[0]

    def with_joints(self, joints) -> Skeleton:
        return Skeleton(joints, self.frame)

    def __repr__(self):
        return f"Skeleton(J={self.num_joints}, frame={self.frame!r})"


def check_compatible(a: Skeleton, b: Skeleton) -> None:
    if a.frame != b.frame:
        raise FrameMismatch(f"frame {a.frame!r} != {b.frame!r}")
    if a.num_joints != b.num_joints:
        raise JointCountMismatch(f"J={a.num_joints} != J={b.num_joints}")


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        vals = (self.fx, self.fy, self.cx, self.cy)
        if not all(np.isfinite(v) for v in vals):
            raise DataError("intrinsics must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise DataError(f"focal lengths must be positive, got {self.fx}, {self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise DataError(
                f"principal point ({self.cx}, {self.cy}) outside "
                f"{self.width}x{self.height} image"
            )

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def K_inv(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )


@dataclass(frozen=True, eq=False)
class Extrinsics:
    """World-to-camera rigid transform, ``X_cam = R @ X_world + t``."""

    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = _frozen(self.R, (3, 3))
        if not is_rotation(R):
            raise DataError(f"R is not a rotation (error {rotation_error(R):.2e})")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", _frozen(self.t, (3,)))

    @property
    def camera_center(self) -> np.ndarray:
        return -self.R.T @ self.t


def project(p, intr: Intrinsics) -> np.ndarray:
    """Pinhole projection of camera-frame point(s) ``(..., 3)`` to pixels ``(..., 2)``."""
    p = np.asarray(p, dtype=np.float64)
    z = p[..., 2]
    if np.any(z <= MIN_DEPTH_MM):
        raise NonPositiveDepth(f"depth must exceed {MIN_DEPTH_MM} mm")
    u = intr.fx * (p[..., 0] / z) + intr.cx
    v = intr.fy * (p[..., 1] / z) + intr.cy
    return np.stack([u, v], axis=-1)


def unproject(px, depth, intr: Intrinsics) -> np.ndarray:
    """Back-project pixel(s) at the given z-depth(s) into the camera frame."""
    px = np.asarray(px, dtype=np.float64)
    d = np.asarray(depth, dtype=np.float64)
    if np.any(d <= MIN_DEPTH_MM):
        raise NonPositiveDepth(f"depth must exceed {MIN_DEPTH_MM} mm")
    x = (px[..., 0] - intr.cx) / intr.fx * d
    y = (px[..., 1] - intr.cy) / intr.fy * d
    return np.stack([x, y, np.broadcast_to(d, x.shape)], axis=-1)


def to_world(s: Skeleton, ext: Extrinsics) -> Skeleton:
    if not is_camera_frame(s.frame):
        raise FrameMismatch(f"expected a camera-frame skeleton, got {s.frame!r}")
    # row form of R^T (X - t)
    return Skeleton((s.joints - ext.t) @ ext.R, WORLD)


def to_camera(s: Skeleton, ext: Extrinsics, view_id: str) -> Skeleton:
    if s.frame != WORLD:
        raise FrameMismatch(f"expected a world-frame skeleton, got {s.frame!r}")
    return Skeleton(s.joints @ ext.R.T + ext.t, camera_frame(view_id))


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def orthogonal_axis(a: np.ndarray) -> np.ndarray:
    """Deterministic unit vector perpendicular to ``a``.

    Crosses ``a`` with the basis vector of its smallest-magnitude component
    (lowest index on ties).
    """
    e = np.zeros(3)
    e[int(np.argmin(np.abs(a)))] = 1.0
    n = np.cross(a, e)
    return n / np.linalg.norm(n)


def axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    K = _skew(axis)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def rotation_between(a, b, antiparallel_tol: float = 1e-6) -> np.ndarray:
    """Minimal rotation taking unit vector ``a`` onto unit vector ``b``.

    Antiparallel inputs (angle within ``antiparallel_tol`` of pi) have no
    unique axis; a half-turn about :func:`orthogonal_axis` of ``a`` is
    returned instead.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    for name, v in (("a", a), ("b", b)):
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise DataError(f"{name} must be a unit vector")
    c = float(np.clip(a @ b, -1.0, 1.0))
    if np.arccos(c) > np.pi - antiparallel_tol:
        log.debug("rotation_between: degenerate axis, using half-turn")
        n = orthogonal_axis(a)
        return 2.0 * np.outer(n, n) - np.eye(3)
    if c >= 0.0:
        K = _skew(np.cross(a, b))
        # (1 - c) / s^2 == 1 / (1 + c), stable for small angles
        return np.eye(3) + K + (K @ K) / (1.0 + c)
    # obtuse: 1 + c cancels, so compose the reflections through a and
    # through the bisector (a + b); same rotation about a x b
    m = a + b
    m /= np.linalg.norm(m)
    return (np.eye(3) - 2.0 * np.outer(m, m)) @ (np.eye(3) - 2.0 * np.outer(a, a))


def look_at(center, target, up=(0.0, -1.0, 0.0)) -> Extrinsics:
    """Extrinsics of a camera at ``center`` whose optical axis points at ``target``."""
    center = np.asarray(center, dtype=np.float64)
    z = np.asarray(target, dtype=np.float64) - center
    z /= np.linalg.norm(z)
    x = np.cross(np.asarray(up, dtype=np.float64), z)
    if np.linalg.norm(x) < 1e-9:
        x = orthogonal_axis(z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.stack([x, y, z])
    return Extrinsics(R, -R @ center)
