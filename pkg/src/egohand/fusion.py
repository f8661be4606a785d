"""Multi-view merge with temporal fallback, and multi-model ensembling."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FrameMismatch, InvalidParams, LengthMismatch
from .geometry import WORLD, Skeleton, check_compatible
from .metrics import mpjpe, pa_mpjpe

MEAN_OF_PAIR = "mean_of_pair"
TEMPORAL_FALLBACK = "temporal_fallback"
PASSTHROUGH = "passthrough"
MISSING = "missing"
BRANCHES = (MEAN_OF_PAIR, TEMPORAL_FALLBACK, PASSTHROUGH, MISSING)


def _check_pair(name: str, pair) -> tuple[float, float]:
    w = tuple(float(x) for x in pair)
    if len(w) != 2 or min(w) < 0 or abs(sum(w) - 1.0) > 1e-12:
        raise InvalidParams(f"{name} must be two non-negative weights summing to 1, got {pair}")
    return w


@dataclass(frozen=True)
class FusionConfig:
    merge_threshold_mm: float = 30.0
    ensemble_weights: tuple[float, float] = (0.7, 0.3)
    gap_threshold_mm: float = 20.0
    gap_weights: tuple[float, float] = (0.5, 0.5)
    # compare every view against the previous frame instead of only the selected pair
    fallback_all_views: bool = False
    pa_with_scale: bool = True

    def __post_init__(self):
        if not (self.merge_threshold_mm > 0 and self.gap_threshold_mm > 0):
            raise InvalidParams("thresholds must be positive")
        object.__setattr__(self, "ensemble_weights", _check_pair("ensemble_weights", self.ensemble_weights))
        object.__setattr__(self, "gap_weights", _check_pair("gap_weights", self.gap_weights))

    def to_dict(self) -> dict:
        return {
            "merge_threshold_mm": self.merge_threshold_mm,
            "ensemble_weights": list(self.ensemble_weights),
            "gap_threshold_mm": self.gap_threshold_mm,
            "gap_weights": list(self.gap_weights),
            "fallback_all_views": self.fallback_all_views,
            "pa_with_scale": self.pa_with_scale,
        }


@dataclass(frozen=True)
class MergeDecision:
    """Audit record of one :func:`merge_frame` call."""

    frame_id: int | None
    branch: str
    selected_pair: tuple[str, str] | None = None
    pair_mpjpe_mm: float | None = None
    chosen_view: str | None = None
    fallback_pa_mpjpe: dict[str, float] = field(default_factory=dict)
    no_previous: bool = False
    interpolated: bool = False

    def to_dict(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "branch": self.branch,
            "selected_pair": list(self.selected_pair) if self.selected_pair else None,
            "pair_mpjpe_mm": self.pair_mpjpe_mm,
            "chosen_view": self.chosen_view,
            "fallback_pa_mpjpe": dict(self.fallback_pa_mpjpe),
            "no_previous": self.no_previous,
            "interpolated": self.interpolated,
        }


def _sorted_views(views) -> list[tuple[str, Skeleton]]:
    views = sorted(((str(v), s) for v, s in views), key=lambda item: item[0])
    ids = [v for v, _ in views]
    if len(set(ids)) != len(ids):
        raise DataError(f"duplicate view ids in frame: {ids}")
    for v, s in views:
        if s.frame != WORLD:
            raise FrameMismatch(f"view {v!r} is in frame {s.frame!r}, expected world")
    for _, s in views[1:]:
        check_compatible(views[0][1], s)
    return views


def merge_frame(views, prev: Skeleton | None = None, cfg: FusionConfig = FusionConfig(), frame_id=None):
    """Fuse one frame's per-view world skeletons.

    The two most mutually consistent views (lowest pairwise MPJPE, ties
    broken by view id order) are averaged when their disagreement is below
    ``cfg.merge_threshold_mm``. Otherwise the view of that pair closest to
    ``prev`` in PA-MPJPE is kept. Without ``prev`` the pair mean is used
    and ``no_previous`` is set.

    Returns ``(skeleton or None, MergeDecision)``; ``None`` only when no view
    is given.
    """
    views = _sorted_views(views)
    if prev is not None and views:
        check_compatible(views[0][1], prev)
    if not views:
        return None, MergeDecision(frame_id, MISSING)
    if len(views) == 1:
        v, s = views[0]
        return s, MergeDecision(frame_id, PASSTHROUGH, chosen_view=v)

    best = None
    for (vi, si), (vj, sj) in itertools.combinations(views, 2):
        err = mpjpe(si, sj)
        if best is None or err < best[0]:
            best = (err, vi, si, vj, sj)
    err, vi, si, vj, sj = best

    if err < cfg.merge_threshold_mm or prev is None:
        mean = Skeleton((si.joints + sj.joints) * 0.5, WORLD)
        return mean, MergeDecision(
            frame_id, MEAN_OF_PAIR, (vi, vj), err, no_previous=not err < cfg.merge_threshold_mm
        )

    candidates = views if cfg.fallback_all_views else [(vi, si), (vj, sj)]
    scores = {v: pa_mpjpe(s, prev, with_scale=cfg.pa_with_scale) for v, s in candidates}
    chosen, chosen_s = candidates[0]
    for v, s in candidates[1:]:
        if scores[v] < scores[chosen]:
            chosen, chosen_s = v, s
    return chosen_s, MergeDecision(
        frame_id, TEMPORAL_FALLBACK, (vi, vj), err, chosen_view=chosen, fallback_pa_mpjpe=scores
    )


def interpolate_missing(frame_ids, skeletons):
    """Fill ``None`` entries linearly in frame id between nearest known neighbors.

    Leading and trailing gaps copy the nearest known skeleton.
    """
    known = [i for i, s in enumerate(skeletons) if s is not None]
    if not known:
        raise DataError("no frame has any view to interpolate from")
    out = list(skeletons)
    for i, s in enumerate(skeletons):
        if s is not None:
            continue
        before = [k for k in known if k < i]
        after = [k for k in known if k > i]
        if not before:
            out[i] = skeletons[after[0]]
        elif not after:
            out[i] = skeletons[before[-1]]
        else:
            a, b = before[-1], after[0]
            fa, fb, fi = frame_ids[a], frame_ids[b], frame_ids[i]
            w = (fi - fa) / (fb - fa)
            ja, jb = skeletons[a].joints, skeletons[b].joints
            out[i] = Skeleton(ja + w * (jb - ja), WORLD)
    return out


def merge_sequence(frames, cfg: FusionConfig = FusionConfig()):
    """Merge a video frame by frame.

    ``frames`` is an ordered iterable of ``(frame_id, views)``. The previous
    frame reference is the last fused (not interpolated) output. Frames
    without views are interpolated afterwards and flagged.

    Returns ``(skeletons, decisions)``.
    """
    frames = list(frames)
    ids = [fid for fid, _ in frames]
    if any(b <= a for a, b in zip(ids, ids[1:])):
        raise DataError("frames must be strictly increasing in frame_id")
    merged, decisions = [], []
    prev = None
    for fid, views in frames:
        s, d = merge_frame(views, prev, cfg, frame_id=fid)
        merged.append(s)
        decisions.append(d)
        if s is not None:
            prev = s
    if any(s is None for s in merged):
        merged = interpolate_missing(ids, merged)
        decisions = [
            MergeDecision(d.frame_id, MISSING, interpolated=True) if d.branch == MISSING else d
            for d in decisions
        ]
    return merged, decisions


def branch_histogram(decisions) -> dict[str, int]:
    hist = {b: 0 for b in BRANCHES}
    for d in decisions:
        hist[d.branch] += 1
    return hist


def ensemble_frame(a: Skeleton, b: Skeleton, cfg: FusionConfig = FusionConfig()) -> Skeleton:
    """Weighted mean of a primary and a secondary model's skeletons.

    Strong disagreement (MPJPE above ``cfg.gap_threshold_mm``) switches to
    ``cfg.gap_weights``, which give the secondary model more say.
    """
    gap = mpjpe(a, b)
    wa, wb = cfg.gap_weights if gap > cfg.gap_threshold_mm else cfg.ensemble_weights
    return a.with_joints(wa * a.joints + wb * b.joints)


def _uniform_mean(seqs):
    n_frames = len(seqs[0])
    out = []
    for f in range(n_frames):
        frames = [seq[f] for seq in seqs]
        for s in frames[1:]:
            check_compatible(frames[0], s)
        total = frames[0].joints.copy()
        for s in frames[1:]:
            total = total + s.joints
        out.append(frames[0].with_joints(total / len(frames)))
    return out


def ensemble_sequences(runs, cfg: FusionConfig = FusionConfig(), primary: str | None = None):
    """Fuse several models' per-frame sequences.

    ``runs`` is a list of ``(model_tag, sequence)``. Runs sharing the
    primary tag (default: the first run's tag) are averaged uniformly, as
    are the runs of the one other tag allowed; the two means are then
    combined with :func:`ensemble_frame`.
    """
    runs = [(str(tag), list(seq)) for tag, seq in runs]
    if not runs:
        raise DataError("need at least one run")
    lengths = {len(seq) for _, seq in runs}
    if len(lengths) != 1:
        raise LengthMismatch(f"runs have differing lengths {sorted(lengths)}")
    primary = runs[0][0] if primary is None else primary
    groups: dict[str, list] = {}
    for tag, seq in runs:
        groups.setdefault(tag, []).append(seq)
    if primary not in groups:
        raise DataError(f"no run tagged {primary!r}")
    others = [t for t in groups if t != primary]
    if len(others) > 1:
        raise DataError(f"at most two model families can be fused, got {sorted(groups)}")
    fused = _uniform_mean(groups[primary])
    if others:
        secondary = _uniform_mean(groups[others[0]])
        fused = [ensemble_frame(a, b, cfg) for a, b in zip(fused, secondary)]
    return fused
