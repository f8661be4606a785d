"""Lifting 2.5D network outputs (2D keypoints, root-relative 3D, root depth) to 3D."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NonPositiveDepth
from .geometry import Intrinsics, Skeleton, camera_frame, is_rotation, project, rotation_error, unproject


@dataclass(frozen=True, eq=False)
class Prediction25D:
    """One hand prediction in the (possibly virtually rotated) crop camera.

    ``kp2d`` is ``J x 2`` pixels, ``rel3d`` is ``J x 3`` mm relative to the
    root joint. When ``warp_R`` is set, ``kp2d`` and ``rel3d`` live in the
    rotated camera and lifting rotates the result back.
    """

    kp2d: np.ndarray
    rel3d: np.ndarray
    root_depth: float
    root_index: int = 0
    warp_R: np.ndarray | None = None

    def __post_init__(self):
        kp2d = np.array(self.kp2d, dtype=np.float64)
        rel3d = np.array(self.rel3d, dtype=np.float64)
        if kp2d.ndim != 2 or kp2d.shape[1] != 2:
            raise DataError(f"kp2d must be J x 2, got {kp2d.shape}")
        if rel3d.shape != (kp2d.shape[0], 3):
            raise DataError(f"rel3d must be {kp2d.shape[0]} x 3, got {rel3d.shape}")
        if not (np.all(np.isfinite(kp2d)) and np.all(np.isfinite(rel3d))):
            raise DataError("non-finite 2.5D values")
        if not 0 <= self.root_index < kp2d.shape[0]:
            raise DataError(f"root_index {self.root_index} out of range")
        if np.max(np.abs(rel3d[self.root_index])) > 1e-9:
            raise DataError("rel3d must be zero at the root joint")
        if not self.root_depth > 0:
            raise NonPositiveDepth(f"root depth must be positive, got {self.root_depth}")
        for a in (kp2d, rel3d):
            a.setflags(write=False)
        object.__setattr__(self, "kp2d", kp2d)
        object.__setattr__(self, "rel3d", rel3d)
        if self.warp_R is not None:
            R = np.array(self.warp_R, dtype=np.float64).reshape(3, 3)
            if not is_rotation(R):
                raise DataError(f"warp_R is not a rotation (error {rotation_error(R):.2e})")
            R.setflags(write=False)
            object.__setattr__(self, "warp_R", R)


def lift(p: Prediction25D, intr: Intrinsics, view_id: str) -> Skeleton:
    """Absolute camera-frame skeleton from a 2.5D prediction.

    Only the root's 2D keypoint is used; the other ``kp2d`` entries are
    carried along but do not affect the result.
    """
    root = unproject(p.kp2d[p.root_index], p.root_depth, intr)
    joints = root + p.rel3d
    if p.warp_R is not None:
        joints = joints @ p.warp_R  # row form of warp_R^T @ X
    return Skeleton(joints, camera_frame(view_id))


def decompose(s: Skeleton, intr: Intrinsics, root_index: int = 0, warp_R=None) -> Prediction25D:
    """Inverse of :func:`lift`: express a camera-frame skeleton as 2.5D outputs."""
    joints = s.joints
    if warp_R is not None:
        joints = joints @ np.asarray(warp_R, dtype=np.float64).T
    root = joints[root_index]
    rel = joints - root
    rel[root_index] = 0.0
    kp2d = project(joints, intr)
    return Prediction25D(kp2d, rel, float(root[2]), root_index, warp_R)
