"""Command-line interface.

Exit codes: 0 success, 2 usage, 3 I/O, 4 data, 5 numeric.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import DataError, EgoHandError, LengthMismatch
from .fusion import BRANCHES, FusionConfig, ensemble_sequences, merge_sequence
from .geometry import to_world
from .lift import lift
from .metrics import sequence_metrics
from .preprocess import build_rectify_map, virtual_rotation_warp
from .simulation import NoiseModel, SimScenario, corrupt, generate_rig, generate_trajectory, run_benchmark
from .smoothing import EDGE_MODES, SavGolParams, smooth_skeleton_sequence

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_NUMERIC = 5

log = logging.getLogger("egohand")


def _fmt(x: float) -> str:
    return repr(float(x))


def _pick_camera(cams: dict, view: str | None):
    if not cams:
        raise DataError("camera file has no views")
    if view is None:
        return next(iter(cams.values()))
    if view not in cams:
        raise DataError(f"no camera for view {view!r}")
    return cams[view]


def _world_skeleton(rec, cams):
    if rec.frame == "world":
        return rec.skeleton()
    cam = cams.get(rec.view_id)
    if cam is None:
        raise DataError(f"no camera for view {rec.view_id!r}")
    s = lift(rec.raw, cam.intrinsics, rec.view_id) if rec.raw is not None else rec.skeleton()
    return to_world(s, cam.extrinsics)


def fuse_records(records, cams, cfg: FusionConfig, sg: SavGolParams | None):
    """Merge (and smooth) every (video, model) group; returns (records, decision dicts)."""
    out, decision_log = [], []
    for (video, model), by_frame in io.group_records(records).items():
        ids = sorted(by_frame)
        frames = []
        for fid in range(ids[0], ids[-1] + 1):
            recs = by_frame.get(fid, [])
            frames.append((fid, [(r.view_id, _world_skeleton(r, cams)) for r in recs]))
        merged, decisions = merge_sequence(frames, cfg)
        if sg is not None:
            merged = smooth_skeleton_sequence(merged, sg)
        for (fid, _), s, d in zip(frames, merged, decisions):
            out.append(io.PredictionRecord.from_skeleton(s, video, fid, "fused", model))
            decision_log.append({"video_id": video, "model_id": model, **d.to_dict()})
    return out, decision_log


def cmd_fuse(args) -> int:
    cfg = FusionConfig(merge_threshold_mm=args.threshold)
    sg = None if args.no_smooth else SavGolParams(args.window, args.order, args.edge)
    records = io.read_records(args.pred)
    cams = io.read_cameras(args.cameras)
    fused, decisions = fuse_records(records, cams, cfg, sg)
    io.write_records(args.out, fused)
    decisions_path = args.decisions or str(Path(args.out).with_suffix("")) + ".decisions.jsonl"
    io.write_jsonl(decisions_path, decisions)

    hist = {b: 0 for b in BRANCHES}
    for d in decisions:
        hist[d["branch"]] += 1
    print(f"merge_threshold_mm: {cfg.merge_threshold_mm}")
    if sg is None:
        print("smoothing: off")
    else:
        print(f"smoothing: savgol window={sg.window} order={sg.polyorder} edge={sg.edge}")
    print("branches: " + ", ".join(f"{k}={v}" for k, v in hist.items()))
    print(f"wrote {len(fused)} fused records to {args.out}, decisions to {decisions_path}")
    return 0


def cmd_smooth(args) -> int:
    sg = SavGolParams(args.window, args.order, args.edge)
    records = io.read_records(args.pred)
    tracks: dict = {}
    for r in records:
        tracks.setdefault((r.video_id, r.view_id, r.model_id), []).append(r)
    out = []
    for (video, view, model), recs in tracks.items():
        recs.sort(key=lambda r: r.frame_id)
        smoothed = smooth_skeleton_sequence([r.skeleton() for r in recs], sg)
        out.extend(
            io.PredictionRecord(video, r.frame_id, view, model, r.frame, s.joints)
            for r, s in zip(recs, smoothed)
        )
    io.write_records(args.out, out)
    print(f"smoothing: savgol window={sg.window} order={sg.polyorder} edge={sg.edge}")
    print(f"wrote {len(out)} records to {args.out}")
    return 0


def _sequences(path, what: str) -> dict[str, tuple[list[int], list]]:
    index = io.single_track(io.read_records(path), what)
    videos: dict = {}
    for (video, fid), rec in sorted(index.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])):
        ids, seq = videos.setdefault(video, ([], []))
        ids.append(fid)
        seq.append(rec.skeleton())
    return videos


def cmd_ensemble(args) -> int:
    cfg = FusionConfig(
        ensemble_weights=tuple(args.weights),
        gap_threshold_mm=args.gap,
        gap_weights=tuple(args.gap_weights),
    )
    runs = [("primary", _sequences(p, str(p))) for p in args.runs]
    if args.secondary:
        runs.append(("secondary", _sequences(args.secondary, str(args.secondary))))
    videos = list(runs[0][1])
    out = []
    for video in videos:
        ids = runs[0][1][video][0]
        per_video = []
        for tag, seqs in runs:
            if video not in seqs or seqs[video][0] != ids:
                raise LengthMismatch(f"video {video!r}: runs do not cover the same frames")
            per_video.append((tag, seqs[video][1]))
        fused = ensemble_sequences(per_video, cfg, primary="primary")
        out.extend(
            io.PredictionRecord.from_skeleton(s, video, fid, "fused", "ensemble")
            for fid, s in zip(ids, fused)
        )
    for tag, seqs in runs:
        extra = set(seqs) - set(videos)
        if extra:
            raise LengthMismatch(f"videos {sorted(extra)} missing from the first run")
    io.write_records(args.out, out)
    print(f"ensemble_weights: {list(cfg.ensemble_weights)}")
    print(f"gap_threshold_mm: {cfg.gap_threshold_mm} gap_weights: {list(cfg.gap_weights)}")
    print(f"wrote {len(out)} records to {args.out}")
    return 0


def compute_metrics(pred_records, gt_records, with_scale: bool = True):
    pred = io.single_track(pred_records, "pred")
    gt = io.single_track(gt_records, "gt")
    if set(pred) != set(gt):
        missing = sorted(set(gt) - set(pred))[:3]
        extra = sorted(set(pred) - set(gt))[:3]
        raise LengthMismatch(f"pred/gt frames differ (missing {missing}, extra {extra})")
    keys = sorted(gt, key=lambda k: (str(k[0]), k[1]))
    return sequence_metrics(
        [pred[k].skeleton() for k in keys], [gt[k].skeleton() for k in keys], with_scale=with_scale
    )


def cmd_metrics(args) -> int:
    report = compute_metrics(io.read_records(args.pred), io.read_records(args.gt))
    print(f"frames: {len(report.per_frame)}")
    print(f"MPJPE: {report.mpjpe:.3f} mm")
    if args.pa:
        print(f"PA-MPJPE: {report.pa_mpjpe:.3f} mm")
    doc = {"frames": len(report.per_frame), "mpjpe": report.mpjpe}
    if args.pa:
        doc["pa_mpjpe"] = report.pa_mpjpe
        doc["degenerate_frames"] = report.degenerate_frames
    doc["per_joint"] = list(report.per_joint)
    print(json.dumps(doc))
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    return 0


def _scenario(args) -> SimScenario:
    noise = NoiseModel(
        gaussian_sigma_mm=args.sigma,
        outlier_prob=args.outlier_prob,
        seed=args.seed,
    )
    return SimScenario(
        n_views=args.views, n_frames=args.frames, seed=args.seed, rig_radius_mm=args.radius, noise=noise
    )


def cmd_simulate(args) -> int:
    scenario = _scenario(args)
    gt = generate_trajectory(scenario)
    rig = generate_rig(scenario, gt)
    preds = corrupt(gt, rig, scenario.noise)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_records(
        out / "gt.jsonl",
        (io.PredictionRecord.from_skeleton(s, "sim", f, "gt", "gt") for f, s in enumerate(gt)),
    )
    io.write_cameras(out / "cameras.json", rig)
    io.write_records(
        out / "predictions.jsonl",
        (
            io.PredictionRecord.from_skeleton(s, "sim", f, v, "sim")
            for f in range(scenario.n_frames)
            for v, seq in preds.items()
            for s in [seq[f]]
        ),
    )
    print(f"wrote gt.jsonl, cameras.json, predictions.jsonl to {out}")
    return 0


def cmd_benchmark(args) -> int:
    cfg = FusionConfig(merge_threshold_mm=args.threshold)
    report = run_benchmark(_scenario(args), cfg, SavGolParams(args.window, args.order, args.edge))
    print(report.to_text(), end="")
    if args.json:
        Path(args.json).write_text(report.to_json(), encoding="utf-8")
    return 0


def _parse_bbox(text: str):
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad bbox {text!r}") from None
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("bbox needs cx,cy,w,h")
    return vals


def cmd_warp(args) -> int:
    cam = _pick_camera(io.read_cameras(args.camera), args.view)
    cx, cy, _, _ = args.bbox
    R, H = virtual_rotation_warp(cam.intrinsics, (cx, cy))
    print("R " + " ".join(_fmt(x) for x in R.ravel()))
    print("H " + " ".join(_fmt(x) for x in H.ravel()))
    return 0


def cmd_rectify_map(args) -> int:
    src = _pick_camera(io.read_cameras(args.src), args.view)
    dst = _pick_camera(io.read_cameras(args.dst), args.dst_view)
    rmap = build_rectify_map(src.intrinsics, src.distortion, dst.intrinsics)
    rmap.save(args.out)
    print(
        f"wrote {rmap.width}x{rmap.height} map to {args.out} "
        f"({int(np.count_nonzero(rmap.mask))} valid pixels)"
    )
    return 0


def _add_smoothing_flags(p, required=False):
    defaults = SavGolParams()
    p.add_argument("--window", type=int, default=None if required else defaults.window, required=required)
    p.add_argument("--order", type=int, default=None if required else defaults.polyorder, required=required)
    p.add_argument("--edge", choices=EDGE_MODES, default=defaults.edge, help="series-end padding")


def _add_scenario_flags(p):
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--views", type=int, default=4)
    p.add_argument("--frames", type=int, default=300)
    p.add_argument("--sigma", type=float, default=NoiseModel().gaussian_sigma_mm)
    p.add_argument("--outlier-prob", type=float, default=NoiseModel().outlier_prob)
    p.add_argument("--radius", type=float, default=SimScenario().rig_radius_mm, help="camera arc radius (mm)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="egohand", description="Egocentric hand-pose post-processing toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    defaults = FusionConfig()

    p = sub.add_parser("fuse", help="lift, merge views and smooth a prediction stream")
    p.add_argument("--pred", required=True)
    p.add_argument("--cameras", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--decisions", help="decision log path (default: <out>.decisions.jsonl)")
    p.add_argument("--threshold", type=float, default=defaults.merge_threshold_mm)
    _add_smoothing_flags(p)
    p.add_argument("--no-smooth", action="store_true")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("smooth", help="Savitzky-Golay smoothing per track")
    p.add_argument("--pred", required=True)
    p.add_argument("--out", required=True)
    _add_smoothing_flags(p, required=True)
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("ensemble", help="fuse several models' outputs")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--secondary")
    p.add_argument("--out", required=True)
    p.add_argument("--weights", nargs=2, type=float, default=list(defaults.ensemble_weights), metavar=("WP", "WS"))
    p.add_argument("--gap", type=float, default=defaults.gap_threshold_mm)
    p.add_argument("--gap-weights", nargs=2, type=float, default=list(defaults.gap_weights), metavar=("WP", "WS"))
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("metrics", help="MPJPE / PA-MPJPE against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--pa", action="store_true")
    p.add_argument("--report", help="write the full report as JSON")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("simulate", help="write a synthetic scenario")
    _add_scenario_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="ablation table on a synthetic scenario")
    _add_scenario_flags(p)
    p.add_argument("--threshold", type=float, default=defaults.merge_threshold_mm)
    _add_smoothing_flags(p)
    p.add_argument("--json", help="also write the report as JSON")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("warp", help="virtual rotation towards a hand box")
    p.add_argument("--camera", required=True)
    p.add_argument("--view")
    p.add_argument("--bbox", type=_parse_bbox, required=True)
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("rectify-map", help="fisheye-to-pinhole lookup map")
    p.add_argument("--src", required=True)
    p.add_argument("--dst", required=True)
    p.add_argument("--view")
    p.add_argument("--dst-view")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rectify_map)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EgoHandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
