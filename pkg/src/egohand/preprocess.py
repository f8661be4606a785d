"""Fisheye rectification, virtual-rotation warp and crop scaling.

The fisheye lens follows the 4-coefficient equidistant polynomial
(Kannala-Brandt without the asymmetric terms)::

    theta_d = theta * (1 + k1 theta^2 + k2 theta^4 + k3 theta^6 + k4 theta^8)

where ``theta`` is the angle between the incoming ray and the optical axis
and ``theta_d`` is the radius of the distorted point in normalized
coordinates.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    DataError,
    DimensionMismatch,
    InvalidParams,
    NoConvergence,
    OutOfModelRange,
)
from .geometry import Intrinsics, rotation_between

DEFAULT_THETA_MAX = float(np.deg2rad(80.0))
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
MAP_MAGIC = b"HFMAP1"


@dataclass(frozen=True)
class FisheyeDistortion:
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    k4: float = 0.0
    theta_max: float = DEFAULT_THETA_MAX

    def __post_init__(self):
        if not all(np.isfinite(k) for k in self.coeffs):
            raise InvalidParams("distortion coefficients must be finite")
        if not 0.0 < self.theta_max <= np.pi:
            raise InvalidParams("theta_max must lie in (0, pi]")
        if not self.is_monotone():
            raise InvalidParams(
                f"distortion polynomial is not monotone on [0, {self.theta_max:.4f}] rad"
            )

    @property
    def coeffs(self) -> tuple[float, float, float, float]:
        return (self.k1, self.k2, self.k3, self.k4)

    def is_monotone(self) -> bool:
        # d theta_d / d theta = 1 + 3 k1 u + 5 k2 u^2 + 7 k3 u^3 + 9 k4 u^4 with u = theta^2;
        # it must stay positive for u in [0, theta_max^2].
        k1, k2, k3, k4 = self.coeffs
        poly = np.polynomial.Polynomial([1.0, 3 * k1, 5 * k2, 7 * k3, 9 * k4])
        u_max = self.theta_max**2
        if poly(u_max) <= 0:
            return False
        for root in poly.roots():
            if abs(root.imag) < 1e-12 and 0.0 <= root.real <= u_max:
                return False
        return True

    def theta_d(self, theta):
        t2 = np.asarray(theta) ** 2
        k1, k2, k3, k4 = self.coeffs
        return theta * (1.0 + t2 * (k1 + t2 * (k2 + t2 * (k3 + t2 * k4))))

    def theta_d_prime(self, theta):
        t2 = np.asarray(theta) ** 2
        k1, k2, k3, k4 = self.coeffs
        return 1.0 + t2 * (3 * k1 + t2 * (5 * k2 + t2 * (7 * k3 + t2 * 9 * k4)))

    @property
    def r_d_max(self) -> float:
        return float(self.theta_d(self.theta_max))


def fisheye_distort(p_norm, dist: FisheyeDistortion) -> np.ndarray:
    """Map normalized pinhole coordinates ``(..., 2)`` to distorted ones."""
    p = np.asarray(p_norm, dtype=np.float64)
    r = np.hypot(p[..., 0], p[..., 1])
    small = r < 1e-12
    r_safe = np.where(small, 1.0, r)
    theta = np.arctan(r_safe)
    scale = np.where(small, 1.0, dist.theta_d(theta) / r_safe)
    return p * scale[..., None]


@dataclass(frozen=True)
class NewtonStats:
    iterations: int
    residual: float


def _invert_theta(theta_d: float, dist: FisheyeDistortion) -> tuple[float, NewtonStats]:
    # safeguarded Newton: bisection step whenever Newton leaves the bracket
    lo, hi = 0.0, dist.theta_max
    theta = min(theta_d, hi)
    for it in range(1, NEWTON_MAX_ITER + 1):
        f = float(dist.theta_d(theta)) - theta_d
        if f > 0:
            hi = theta
        else:
            lo = theta
        step = f / float(dist.theta_d_prime(theta))
        new = theta - step
        if not lo <= new <= hi:
            new = 0.5 * (lo + hi)
        if abs(new - theta) <= NEWTON_TOL:
            theta = new
            return theta, NewtonStats(it, abs(float(dist.theta_d(theta)) - theta_d))
        theta = new
    residual = abs(float(dist.theta_d(theta)) - theta_d)
    raise NoConvergence(f"fisheye inversion did not converge in {NEWTON_MAX_ITER} iterations", residual)


def fisheye_undistort(p_d, dist: FisheyeDistortion, return_stats: bool = False):
    """Invert :func:`fisheye_distort` for a single distorted point ``(x_d, y_d)``."""
    p_d = np.asarray(p_d, dtype=np.float64)
    if p_d.shape != (2,):
        raise DataError("fisheye_undistort takes a single (x_d, y_d) point")
    r_d = float(np.hypot(p_d[0], p_d[1]))
    if r_d < 1e-12:
        out = p_d.copy()
        stats = NewtonStats(0, 0.0)
    else:
        if r_d > dist.r_d_max:
            raise OutOfModelRange(
                f"distorted radius {r_d:.6g} beyond model range {dist.r_d_max:.6g}"
            )
        theta, stats = _invert_theta(r_d, dist)
        out = p_d * (np.tan(theta) / r_d)
    return (out, stats) if return_stats else out


@dataclass(frozen=True, eq=False)
class RectifyMap:
    """Per destination pixel, the source pixel to sample and a validity flag.

    ``xy`` has shape ``(height, width, 2)``; ``mask`` is ``(height, width)`` bool.
    """

    xy: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        xy = np.array(self.xy, dtype=np.float64)
        mask = np.array(self.mask, dtype=bool)
        if xy.ndim != 3 or xy.shape[2] != 2 or mask.shape != xy.shape[:2]:
            raise DimensionMismatch(f"inconsistent map shapes {xy.shape} / {mask.shape}")
        xy.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "xy", xy)
        object.__setattr__(self, "mask", mask)

    @property
    def height(self) -> int:
        return self.xy.shape[0]

    @property
    def width(self) -> int:
        return self.xy.shape[1]

    def to_bytes(self) -> bytes:
        header = MAP_MAGIC + struct.pack("<II", self.width, self.height)
        return (
            header
            + self.xy.astype("<f8").tobytes(order="C")
            + self.mask.astype(np.uint8).tobytes(order="C")
        )

    @classmethod
    def from_bytes(cls, buf: bytes) -> RectifyMap:
        n_head = len(MAP_MAGIC) + 8
        if len(buf) < n_head or buf[: len(MAP_MAGIC)] != MAP_MAGIC:
            raise DataError("not a rectify map (bad magic)")
        width, height = struct.unpack("<II", buf[len(MAP_MAGIC) : n_head])
        n = width * height
        if len(buf) != n_head + 16 * n + n:
            raise DataError(f"rectify map payload size mismatch for {width}x{height}")
        xy = np.frombuffer(buf, dtype="<f8", count=2 * n, offset=n_head)
        mask = np.frombuffer(buf, dtype=np.uint8, count=n, offset=n_head + 16 * n)
        if np.any(mask > 1):
            raise DataError("rectify map mask must be 0/1")
        return cls(xy.reshape(height, width, 2), mask.reshape(height, width).astype(bool))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> RectifyMap:
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def build_rectify_map(
    src_intr: Intrinsics, src_dist: FisheyeDistortion | None, dst_intr: Intrinsics
) -> RectifyMap:
    """Lookup map producing an ideal pinhole image (``dst_intr``) from a source camera.

    ``src_dist=None`` treats the source as an undistorted pinhole camera.
    Destination rays beyond the fisheye model range, and samples that fall
    outside the source image, are masked out.
    """
    u, v = np.meshgrid(
        np.arange(dst_intr.width, dtype=np.float64),
        np.arange(dst_intr.height, dtype=np.float64),
    )
    if src_dist is None:
        # focal ratio form keeps equal-intrinsics maps exact
        in_range = np.ones(u.shape, dtype=bool)
        xs = (u - dst_intr.cx) * (src_intr.fx / dst_intr.fx) + src_intr.cx
        ys = (v - dst_intr.cy) * (src_intr.fy / dst_intr.fy) + src_intr.cy
    else:
        p = np.stack([(u - dst_intr.cx) / dst_intr.fx, (v - dst_intr.cy) / dst_intr.fy], axis=-1)
        in_range = np.arctan(np.hypot(p[..., 0], p[..., 1])) <= src_dist.theta_max
        p = fisheye_distort(p, src_dist)
        xs = src_intr.fx * p[..., 0] + src_intr.cx
        ys = src_intr.fy * p[..., 1] + src_intr.cy
    mask = (
        in_range
        & (xs >= 0)
        & (xs <= src_intr.width - 1)
        & (ys >= 0)
        & (ys <= src_intr.height - 1)
    )
    return RectifyMap(np.stack([xs, ys], axis=-1), mask)


def remap_bilinear(img, rmap: RectifyMap) -> tuple[np.ndarray, np.ndarray]:
    """Resample ``img`` (``H x W`` or ``H x W x C``) through ``rmap``.

    Returns the output image and its validity mask; invalid pixels are 0.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim not in (2, 3):
        raise DimensionMismatch(f"image must be H x W or H x W x C, got {img.shape}")
    squeeze = img.ndim == 2
    if squeeze:
        img = img[..., None]
    H, W = img.shape[:2]
    xs, ys = rmap.xy[..., 0], rmap.xy[..., 1]
    valid = rmap.mask.copy()
    if np.any(valid & ((xs < 0) | (xs > W - 1) | (ys < 0) | (ys > H - 1))):
        raise DimensionMismatch(f"map samples fall outside the {W}x{H} source image")

    x = np.where(valid, xs, 0.0)
    y = np.where(valid, ys, 0.0)
    x0 = np.clip(np.floor(x).astype(np.intp), 0, max(W - 2, 0))
    y0 = np.clip(np.floor(y).astype(np.intp), 0, max(H - 2, 0))
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    ax = (x - x0)[..., None]
    ay = (y - y0)[..., None]
    top = img[y0, x0] * (1 - ax) + img[y0, x1] * ax
    bottom = img[y1, x0] * (1 - ax) + img[y1, x1] * ax
    out = top * (1 - ay) + bottom * ay
    out[~valid] = 0.0
    return (out[..., 0] if squeeze else out), valid


def virtual_rotation_warp(intr: Intrinsics, center) -> tuple[np.ndarray, np.ndarray]:
    """Rotation that turns the camera towards pixel ``center``, and its homography.

    ``R`` rotates the ray through ``center`` onto the optical axis, and
    ``H = K R K^-1`` (same intrinsics on both sides) moves ``center`` to
    the principal point.
    """
    u, v = center
    if not (0 <= u < intr.width and 0 <= v < intr.height):
        raise DataError(f"center ({u}, {v}) outside the image")
    ray = intr.K_inv @ np.array([u, v, 1.0])
    ray /= np.linalg.norm(ray)
    R = rotation_between(ray, np.array([0.0, 0.0, 1.0]))
    H = intr.K @ R @ intr.K_inv
    return R, H


def apply_homography(H, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    h = np.concatenate([pts, np.ones(pts.shape[:-1] + (1,))], axis=-1) @ np.asarray(H).T
    return h[..., :2] / h[..., 2:3]


@dataclass(frozen=True)
class BBox:
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise DataError(f"bbox size must be positive, got {self.w} x {self.h}")

    @property
    def diag(self) -> float:
        return float(np.hypot(self.w, self.h))

    def corners(self) -> tuple[float, float, float, float]:
        return (
            self.cx - self.w / 2,
            self.cy - self.h / 2,
            self.cx + self.w / 2,
            self.cy + self.h / 2,
        )

    def overlaps(self, other: BBox) -> bool:
        ax0, ay0, ax1, ay1 = self.corners()
        bx0, by0, bx1, by1 = other.corners()
        return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1


@dataclass(frozen=True)
class CropPolicy:
    expand_scale: float = 1.3
    no_expand_scale: float = 1.0
    small_hand_diag_px: float = 80.0
    overlap_frac_threshold: float = 0.2

    def __post_init__(self):
        if not self.expand_scale >= self.no_expand_scale >= 1.0:
            raise InvalidParams("need expand_scale >= no_expand_scale >= 1")


@dataclass(frozen=True)
class VideoCropStats:
    median_bbox_diag_px: float
    overlap_fraction: float


def video_crop_stats(frames) -> VideoCropStats:
    """Per-video statistics from per-frame lists of hand boxes (one or two per frame)."""
    diags, overlapping, n = [], 0, 0
    for boxes in frames:
        boxes = list(boxes)
        diags.extend(b.diag for b in boxes)
        n += 1
        if len(boxes) >= 2 and any(
            a.overlaps(b) for i, a in enumerate(boxes) for b in boxes[i + 1 :]
        ):
            overlapping += 1
    if not diags:
        raise DataError("no boxes in video")
    return VideoCropStats(float(np.median(diags)), overlapping / n)


def crop_scale_for_video(stats: VideoCropStats, policy: CropPolicy = CropPolicy()) -> float:
    """Crop enlargement for a whole video: no expansion for small or overlapping hands."""
    if not 0.0 <= stats.overlap_fraction <= 1.0:
        raise DataError("overlap_fraction must lie in [0, 1]")
    if (
        stats.median_bbox_diag_px < policy.small_hand_diag_px
        or stats.overlap_fraction > policy.overlap_frac_threshold
    ):
        return policy.no_expand_scale
    return policy.expand_scale


def enlarge_bbox(b: BBox, scale: float, width: float, height: float) -> BBox:
    """Scale ``b`` about its center, then fit it inside a ``width x height`` image.

    Oversized sides are clipped to the image size; a box that sticks out is
    shifted back inside, so the center moves only when it has to.
    """
    if scale < 1.0:
        raise InvalidParams("scale must be >= 1")
    w = min(b.w * scale, width)
    h = min(b.h * scale, height)
    cx = float(np.clip(b.cx, w / 2, width - w / 2))
    cy = float(np.clip(b.cy, h / 2, height - h / 2))
    return BBox(cx, cy, w, h)
