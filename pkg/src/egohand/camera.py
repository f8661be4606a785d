from __future__ import annotations

from dataclasses import dataclass

from .geometry import Extrinsics, Intrinsics
from .preprocess import FisheyeDistortion


@dataclass(frozen=True, eq=False)
class CameraModel:
    """One calibrated view: pinhole intrinsics, optional fisheye lens, pose."""

    view_id: str
    intrinsics: Intrinsics
    extrinsics: Extrinsics
    distortion: FisheyeDistortion | None = None
