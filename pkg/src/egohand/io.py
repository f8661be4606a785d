"""Prediction streams (JSON Lines) and camera files (JSON).

A prediction record is one JSON object per line::

    {"video_id": "v1", "frame_id": 0, "view_id": "cam0", "model_id": "m",
     "frame": "camera", "joints": [x0, y0, z0, x1, ...]}

``joints`` is a flat list of ``3 J`` numbers in mm. Records may instead
(or additionally) carry the raw 2.5D outputs ``kp2d`` (flat ``2 J``),
``rel3d`` (flat ``3 J``), ``root_depth``, optional ``root_index`` and
optional ``warp_R`` (9 numbers, row-major). Floats are written with
``repr`` precision, so a write/read cycle is exact.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .camera import CameraModel
from .errors import DataError, InvariantViolation, ParseError
from .geometry import WORLD, Extrinsics, Intrinsics, Skeleton, camera_frame, rotation_error
from .lift import Prediction25D
from .preprocess import FisheyeDistortion

log = logging.getLogger(__name__)

FRAME_TAGS = ("camera", "world")
RAW_FIELDS = ("kp2d", "rel3d", "root_depth")
# rotations further than this from orthonormal are rejected on load
ROTATION_LOAD_TOL = 1e-6
ROTATION_EXACT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PredictionRecord:
    video_id: str
    frame_id: int
    view_id: str
    model_id: str
    frame: str
    joints: np.ndarray | None = None
    raw: Prediction25D | None = None

    @property
    def key(self) -> tuple[str, int, str, str]:
        return (self.video_id, self.frame_id, self.view_id, self.model_id)

    def skeleton(self) -> Skeleton:
        if self.joints is None:
            raise InvariantViolation("record has no 3D joints", self.key)
        tag = WORLD if self.frame == "world" else camera_frame(self.view_id)
        return Skeleton(self.joints, tag)

    @classmethod
    def from_skeleton(cls, s: Skeleton, video_id: str, frame_id: int, view_id: str, model_id: str):
        return cls(video_id, frame_id, view_id, model_id, "world" if s.frame == WORLD else "camera", s.joints)

    def to_dict(self) -> dict:
        d = {
            "video_id": self.video_id,
            "frame_id": self.frame_id,
            "view_id": self.view_id,
            "model_id": self.model_id,
            "frame": self.frame,
        }
        if self.joints is not None:
            d["joints"] = self.joints.ravel().tolist()
        if self.raw is not None:
            d["kp2d"] = self.raw.kp2d.ravel().tolist()
            d["rel3d"] = self.raw.rel3d.ravel().tolist()
            d["root_depth"] = float(self.raw.root_depth)
            d["root_index"] = self.raw.root_index
            if self.raw.warp_R is not None:
                d["warp_R"] = self.raw.warp_R.ravel().tolist()
        return d


def _reject_constant(name):
    raise ValueError(f"non-finite number {name}")


def _numbers(value, name: str, key) -> list[float]:
    if not isinstance(value, list):
        raise InvariantViolation(f"{name} must be a list of numbers", key)
    out = []
    for x in value:
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise InvariantViolation(f"{name} contains a non-number {x!r}", key)
        try:
            x = float(x)
        except OverflowError:
            raise InvariantViolation(f"{name} contains an out-of-range number", key) from None
        if not math.isfinite(x):
            raise InvariantViolation(f"{name} contains a non-finite value", key)
        out.append(x)
    return out


def record_from_dict(d: dict) -> PredictionRecord:
    if not isinstance(d, dict):
        raise InvariantViolation("record must be a JSON object")
    for name in ("video_id", "frame_id", "view_id", "model_id", "frame"):
        if name not in d:
            raise InvariantViolation(f"missing field {name!r}")
    key = (d["video_id"], d["frame_id"], d["view_id"], d["model_id"])
    for name in ("video_id", "view_id", "model_id"):
        if not isinstance(d[name], str):
            raise InvariantViolation(f"{name} must be a string", key)
    fid = d["frame_id"]
    if isinstance(fid, bool) or not isinstance(fid, int) or fid < 0:
        raise InvariantViolation("frame_id must be a non-negative integer", key)
    if d["frame"] not in FRAME_TAGS:
        raise InvariantViolation(f"frame must be one of {FRAME_TAGS}", key)

    joints = None
    if "joints" in d:
        flat = _numbers(d["joints"], "joints", key)
        if not flat or len(flat) % 3:
            raise InvariantViolation("joints length must be a positive multiple of 3", key)
        joints = np.array(flat).reshape(-1, 3)

    raw = None
    present = [f for f in RAW_FIELDS if f in d]
    if present and len(present) != len(RAW_FIELDS):
        raise InvariantViolation(f"incomplete 2.5D fields, need all of {RAW_FIELDS}", key)
    if present:
        if d["frame"] != "camera":
            raise InvariantViolation("2.5D fields require a camera-frame record", key)
        kp2d = _numbers(d["kp2d"], "kp2d", key)
        rel3d = _numbers(d["rel3d"], "rel3d", key)
        depth = _numbers([d["root_depth"]], "root_depth", key)[0]
        if len(kp2d) % 2 or len(rel3d) != 3 * (len(kp2d) // 2) or not kp2d:
            raise InvariantViolation("kp2d / rel3d lengths disagree", key)
        root_index = d.get("root_index", 0)
        if isinstance(root_index, bool) or not isinstance(root_index, int):
            raise InvariantViolation("root_index must be an integer", key)
        warp_R = None
        if d.get("warp_R") is not None:
            warp_R = _numbers(d["warp_R"], "warp_R", key)
            if len(warp_R) != 9:
                raise InvariantViolation("warp_R must have 9 entries", key)
        try:
            raw = Prediction25D(
                np.array(kp2d).reshape(-1, 2),
                np.array(rel3d).reshape(-1, 3),
                depth,
                root_index,
                None if warp_R is None else np.array(warp_R).reshape(3, 3),
            )
        except (DataError, ArithmeticError) as exc:
            raise InvariantViolation(str(exc), key) from exc
        if joints is not None and joints.shape[0] != raw.kp2d.shape[0]:
            raise InvariantViolation("joints and 2.5D fields disagree on J", key)

    if joints is None and raw is None:
        raise InvariantViolation("record needs joints or 2.5D fields", key)
    return PredictionRecord(d["video_id"], fid, d["view_id"], d["model_id"], d["frame"], joints, raw)


def parse_records(lines) -> list[PredictionRecord]:
    """Parse JSON Lines text (an iterable of lines). Errors name the 1-based line."""
    records, seen = [], {}
    for lineno, line in enumerate(lines, start=1):
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ParseError(f"invalid UTF-8: {exc}", lineno) from None
        text = line.rstrip("\r\n")
        if not text.strip():
            raise ParseError("blank line", lineno)
        try:
            obj = json.loads(text, parse_constant=_reject_constant)
        except (ValueError, RecursionError) as exc:
            raise ParseError(f"invalid JSON: {exc}", lineno) from None
        try:
            rec = record_from_dict(obj)
        except InvariantViolation as exc:
            raise InvariantViolation(exc.detail, exc.key, lineno) from None
        if rec.key in seen:
            raise InvariantViolation(
                f"duplicate record (first seen on line {seen[rec.key]})", rec.key, lineno
            )
        seen[rec.key] = lineno
        records.append(rec)
    return records


def read_records(path) -> list[PredictionRecord]:
    with open(path, "rb") as fh:
        return parse_records(fh)


def format_records(records) -> str:
    return "".join(json.dumps(r.to_dict()) + "\n" for r in records)


def write_records(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_records(records))


def write_jsonl(path, objects) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objects:
            fh.write(json.dumps(obj) + "\n")


def polar_orthonormalize(R) -> np.ndarray:
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=np.float64))
    Q = U @ Vt
    if np.linalg.det(Q) < 0:
        U[:, -1] *= -1
        Q = U @ Vt
    return Q


def _load_rotation(values, view_id) -> np.ndarray:
    R = np.array(values, dtype=np.float64).reshape(3, 3)
    err = rotation_error(R)
    if err <= ROTATION_EXACT_TOL:
        return R
    if err > ROTATION_LOAD_TOL:
        raise DataError(f"view {view_id!r}: R is not a rotation (error {err:.2e})")
    log.warning("view %r: R off by %.2e, re-orthonormalized", view_id, err)
    return polar_orthonormalize(R)


def camera_from_dict(view_id: str, d: dict) -> CameraModel:
    try:
        intr = d["intrinsics"]
        intrinsics = Intrinsics(
            float(intr["fx"]), float(intr["fy"]), float(intr["cx"]), float(intr["cy"]),
            int(intr["width"]), int(intr["height"]),
        )
        dist = None
        if d.get("distortion") is not None:
            k = d["distortion"]
            kwargs = {}
            if "theta_max" in k:
                kwargs["theta_max"] = float(k["theta_max"])
            dist = FisheyeDistortion(
                float(k["k1"]), float(k["k2"]), float(k["k3"]), float(k["k4"]), **kwargs
            )
        ext = d.get("extrinsics", {"R": np.eye(3).ravel().tolist(), "t": [0.0, 0.0, 0.0]})
        R_vals = _numbers(ext["R"], "R", view_id)
        t_vals = _numbers(ext["t"], "t", view_id)
        if len(R_vals) != 9 or len(t_vals) != 3:
            raise DataError(f"view {view_id!r}: R needs 9 and t needs 3 entries")
        extrinsics = Extrinsics(_load_rotation(R_vals, view_id), np.array(t_vals))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"view {view_id!r}: malformed camera entry ({exc!r})") from exc
    return CameraModel(view_id, intrinsics, extrinsics, dist)


def camera_to_dict(cam: CameraModel) -> dict:
    i = cam.intrinsics
    d = {
        "intrinsics": {"fx": i.fx, "fy": i.fy, "cx": i.cx, "cy": i.cy, "width": i.width, "height": i.height},
        "distortion": None,
        "extrinsics": {"R": cam.extrinsics.R.ravel().tolist(), "t": cam.extrinsics.t.tolist()},
    }
    if cam.distortion is not None:
        k = cam.distortion
        d["distortion"] = {"k1": k.k1, "k2": k.k2, "k3": k.k3, "k4": k.k4, "theta_max": k.theta_max}
    return d


def read_cameras(path) -> dict[str, CameraModel]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh, parse_constant=_reject_constant)
        except ValueError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("views"), dict):
        raise DataError(f"{path}: expected an object with a 'views' mapping")
    return {str(v): camera_from_dict(str(v), d) for v, d in doc["views"].items()}


def write_cameras(path, cams) -> None:
    doc = {"views": {c.view_id: camera_to_dict(c) for c in cams}}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def group_records(records):
    """``{(video_id, model_id): {frame_id: [records]}}`` in first-seen order."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.video_id, r.model_id), {}).setdefault(r.frame_id, []).append(r)
    return groups


def single_track(records, what: str) -> dict[tuple[str, int], PredictionRecord]:
    """Index records by ``(video_id, frame_id)``, requiring one record per frame."""
    counts = Counter((r.video_id, r.frame_id) for r in records)
    dup = [k for k, n in counts.items() if n > 1]
    if dup:
        raise DataError(f"{what}: several records for video/frame {dup[0]}")
    return {(r.video_id, r.frame_id): r for r in records}
