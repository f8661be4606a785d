"""Offline Savitzky-Golay smoothing of per-video trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

from .errors import FrameMismatch, InvalidParams, JointCountMismatch
from .geometry import Skeleton


EDGE_MODES = ("mirror", "odd")


@dataclass(frozen=True)
class SavGolParams:
    window: int = 9
    polyorder: int = 2
    # "mirror": x[1], x[0] | x[0] ... ; "odd": 2 x[0] - x[1] | x[0] ..., keeps linear trends
    edge: str = "mirror"

    def __post_init__(self):
        if isinstance(self.window, bool) or not isinstance(self.window, (int, np.integer)):
            raise InvalidParams("window must be an integer")
        if isinstance(self.polyorder, bool) or not isinstance(self.polyorder, (int, np.integer)):
            raise InvalidParams("polyorder must be an integer")
        if self.window < 3 or self.window % 2 == 0:
            raise InvalidParams(f"window must be odd and >= 3, got {self.window}")
        if not 0 <= self.polyorder < self.window:
            raise InvalidParams(
                f"polyorder must satisfy 0 <= polyorder < window, got {self.polyorder}"
            )
        if self.edge not in EDGE_MODES:
            raise InvalidParams(f"edge must be one of {EDGE_MODES}, got {self.edge!r}")

    @property
    def half(self) -> int:
        return (self.window - 1) // 2


def savgol_coeffs(p: SavGolParams) -> np.ndarray:
    """Central smoothing weights, ordered from offset ``-h`` to ``+h``.

    The weights are the row of the least-squares pseudoinverse that
    evaluates the fitted polynomial at offset 0. The fit uses a Legendre
    basis on offsets scaled to [-1, 1]; it spans the same polynomials as
    the monomial Vandermonde matrix but stays well conditioned at high order.
    """
    h = p.half
    offsets = np.arange(-h, h + 1, dtype=np.float64) / h
    A = legendre.legvander(offsets, p.polyorder)
    at_zero = legendre.legvander(np.zeros(1), p.polyorder)[0]
    return at_zero @ np.linalg.pinv(A)


def _fit_whole(x: np.ndarray, order: int) -> np.ndarray:
    n = x.shape[0]
    t = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    A = np.vander(t, order + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(A, x, rcond=None)
    return A @ coef


def smooth_series(x, p: SavGolParams = SavGolParams()) -> np.ndarray:
    """Smooth a 1-D series, padding both ends by reflection.

    The default ``mirror`` edge reflects about the edge sample without
    repeating it (``x[2], x[1] | x[0], x[1], ...``); ``odd`` reflects through
    the edge point instead, so linear trends survive at the ends. Series
    shorter than the window get a single polynomial fit of degree
    ``min(polyorder, N - 1)`` instead.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] < 1:
        raise InvalidParams("smooth_series expects a non-empty 1-D series")
    n = x.shape[0]
    if n < p.window:
        return _fit_whole(x, min(p.polyorder, n - 1))
    h = p.half
    padded = np.pad(x, h, mode="reflect", reflect_type="odd" if p.edge == "odd" else "even")
    windows = np.lib.stride_tricks.sliding_window_view(padded, p.window)
    return windows @ savgol_coeffs(p)


def smooth_skeleton_sequence(seq, p: SavGolParams = SavGolParams()) -> list[Skeleton]:
    """Smooth each of the ``3 J`` coordinate trajectories independently."""
    seq = list(seq)
    if not seq:
        return []
    frame = seq[0].frame
    if any(s.frame != frame for s in seq):
        raise FrameMismatch("all skeletons in a sequence must share a frame")
    if len({s.num_joints for s in seq}) != 1:
        raise JointCountMismatch("joint count varies across the sequence")
    data = np.stack([s.joints for s in seq])
    out = np.empty_like(data)
    for j in range(data.shape[1]):
        for c in range(3):
            out[:, j, c] = smooth_series(data[:, j, c], p)
    return [Skeleton(o, frame) for o in out]
