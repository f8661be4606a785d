"""Joint-error metrics and similarity (Procrustes) alignment."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, LengthMismatch
from .geometry import Skeleton, check_compatible

# relative singular-value floor used to call a centered point set rank-deficient
RANK_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    """``x -> scale * R @ x + t``. ``degenerate`` marks the fallback transform."""

    scale: float = 1.0
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))
    degenerate: bool = False

    def apply(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return self.scale * points @ self.R.T + self.t

    def apply_skeleton(self, s: Skeleton) -> Skeleton:
        return s.with_joints(self.apply(s.joints))


@dataclass(frozen=True)
class MetricReport:
    mpjpe: float
    pa_mpjpe: float
    per_joint: tuple[float, ...]
    per_frame: tuple[float, ...]
    per_frame_pa: tuple[float, ...] = ()
    degenerate_frames: int = 0

    def to_dict(self) -> dict:
        return {
            "mpjpe": self.mpjpe,
            "pa_mpjpe": self.pa_mpjpe,
            "per_joint": list(self.per_joint),
            "per_frame": list(self.per_frame),
            "per_frame_pa": list(self.per_frame_pa),
            "degenerate_frames": self.degenerate_frames,
        }


def joint_errors(a: Skeleton, b: Skeleton) -> np.ndarray:
    check_compatible(a, b)
    return np.linalg.norm(a.joints - b.joints, axis=1)


def mpjpe(a: Skeleton, b: Skeleton) -> float:
    """Mean per-joint Euclidean distance in mm."""
    return float(np.mean(joint_errors(a, b)))


def umeyama_align(src: Skeleton, dst: Skeleton, with_scale: bool = True) -> SimilarityTransform:
    """Least-squares similarity transform taking ``src`` onto ``dst``.

    Reflections are excluded by flipping the sign of the smallest singular
    direction of the cross-covariance. Rank-deficient ``src`` (all joints
    coincident or collinear) yields a translation-only transform with
    ``degenerate=True`` instead of raising, since occluded frames can
    collapse that way.
    """
    check_compatible(src, dst)
    if src.num_joints < 3:
        raise DataError("alignment needs at least 3 joints")
    x, y = src.joints, dst.joints
    mu_x, mu_y = x.mean(axis=0), y.mean(axis=0)
    xc, yc = x - mu_x, y - mu_y

    sv = np.linalg.svd(xc, compute_uv=False)
    if sv[0] == 0.0 or sv[1] <= RANK_TOL * sv[0]:
        return SimilarityTransform(1.0, np.eye(3), mu_y - mu_x, degenerate=True)

    n = x.shape[0]
    cov = yc.T @ xc / n
    U, d, Vt = np.linalg.svd(cov)
    S = np.ones(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2] = -1.0
    R = (U * S) @ Vt
    if with_scale:
        var_x = np.sum(xc * xc) / n
        scale = float(np.dot(d, S) / var_x)
    else:
        scale = 1.0
    t = mu_y - scale * R @ mu_x
    return SimilarityTransform(scale, R, t)


def pa_mpjpe(pred: Skeleton, gt: Skeleton, with_scale: bool = True) -> float:
    """MPJPE after aligning ``pred`` onto ``gt`` with :func:`umeyama_align`."""
    T = umeyama_align(pred, gt, with_scale=with_scale)
    return mpjpe(T.apply_skeleton(pred), gt)


def sequence_metrics(pred, gt, with_scale: bool = True) -> MetricReport:
    pred, gt = list(pred), list(gt)
    if len(pred) != len(gt):
        raise LengthMismatch(f"{len(pred)} predicted frames vs {len(gt)} reference frames")
    if not pred:
        raise LengthMismatch("empty sequence")
    per_frame, per_frame_pa, per_joint = [], [], []
    degenerate = 0
    for p, g in zip(pred, gt):
        errs = joint_errors(p, g)
        per_joint.append(errs)
        per_frame.append(float(np.mean(errs)))
        T = umeyama_align(p, g, with_scale=with_scale)
        degenerate += T.degenerate
        per_frame_pa.append(mpjpe(T.apply_skeleton(p), g))
    joint_counts = {e.shape[0] for e in per_joint}
    if len(joint_counts) != 1:
        raise DataError("joint count varies across the sequence")
    return MetricReport(
        mpjpe=float(np.mean(per_frame)),
        pa_mpjpe=float(np.mean(per_frame_pa)),
        per_joint=tuple(float(v) for v in np.mean(per_joint, axis=0)),
        per_frame=tuple(per_frame),
        per_frame_pa=tuple(per_frame_pa),
        degenerate_frames=degenerate,
    )
