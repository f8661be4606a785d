"""Deterministic synthetic hand trajectories, camera rigs and corrupted predictions.

Randomness
----------
Every random draw comes from a Philox counter-based generator
(``numpy.random.Philox``) keyed through ``numpy.random.SeedSequence`` with
the entropy tuple ``(seed, stream, *indices)``. Streams are fixed:

* ``STREAM_TRAJECTORY`` (1): trajectory phases, one stream per scenario.
* ``STREAM_RIG`` (2): rig jitter and lens coefficients, indexed by view.
* ``STREAM_NOISE`` (3): prediction noise, indexed by ``(view, frame)``.

Within a noise stream the draw order is fixed: ``J x 3`` standard normals
(joint-major), one uniform for the occlusion decision, three normals for
the offset direction, one uniform for its magnitude, then ``J`` uniforms
for the per-joint dropout variant. All of them are drawn whether or not
the view-frame is occluded, so outputs do not depend on evaluation order.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .camera import CameraModel
from .errors import InfeasibleRig, InvalidParams
from .fusion import FusionConfig, branch_histogram, ensemble_sequences, merge_sequence
from .geometry import WORLD, Intrinsics, Skeleton, axis_angle, look_at, project, to_camera, to_world
from .metrics import sequence_metrics
from .preprocess import FisheyeDistortion
from .smoothing import SavGolParams, smooth_skeleton_sequence

STREAM_TRAJECTORY = 1
STREAM_RIG = 2
STREAM_NOISE = 3

NUM_JOINTS = 21

# Per finger: base joint in the hand frame (mm), spread angle in the palm
# plane (deg, 0 = straight ahead), bone lengths (mm), max flexion per joint (deg).
# Hand frame: x across the palm (thumb side negative), y towards the
# fingertips, z out of the back of the hand.
_FINGERS = (
    ((-22.0, 28.0, -6.0), -50.0, (38.0, 32.0, 27.0), (35.0, 45.0, 60.0)),
    ((-24.0, 88.0, 0.0), -8.0, (40.0, 25.0, 20.0), (75.0, 95.0, 65.0)),
    ((-3.0, 92.0, 0.0), 0.0, (45.0, 28.0, 22.0), (75.0, 95.0, 65.0)),
    ((16.0, 87.0, 0.0), 7.0, (42.0, 27.0, 21.0), (75.0, 95.0, 65.0)),
    ((32.0, 78.0, 0.0), 15.0, (33.0, 20.0, 18.0), (75.0, 95.0, 65.0)),
)


def rng(seed: int, stream: int, *indices: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream, *indices])))


@dataclass(frozen=True)
class NoiseModel:
    gaussian_sigma_mm: float = 5.0
    outlier_prob: float = 0.1
    outlier_range_mm: tuple[float, float] = (30.0, 80.0)
    seed: int = 42
    # "rigid": the whole hand shifts; "joints": each joint shifts with prob 1/2
    occlusion_mode: str = "rigid"

    def __post_init__(self):
        lo, hi = self.outlier_range_mm
        if self.gaussian_sigma_mm < 0:
            raise InvalidParams("sigma must be >= 0")
        if not 0.0 <= self.outlier_prob <= 1.0:
            raise InvalidParams("outlier_prob must lie in [0, 1]")
        if not 0.0 <= lo <= hi:
            raise InvalidParams("outlier range must satisfy 0 <= min <= max")
        if self.occlusion_mode not in ("rigid", "joints"):
            raise InvalidParams(f"unknown occlusion mode {self.occlusion_mode!r}")


@dataclass(frozen=True)
class SimScenario:
    n_views: int = 4
    n_frames: int = 300
    seed: int = 42
    fps: float = 30.0
    # rig: cameras on a horizontal arc around the trajectory center
    rig_radius_mm: float = 400.0
    rig_arc_deg: float = 120.0
    rig_jitter_deg: float = 5.0
    image_size: tuple[int, int] = (640, 480)
    focal_px: float = 250.0
    # trajectory
    root_amplitude_mm: float = 40.0
    root_freqs_hz: tuple[float, float] = (0.15, 0.4)
    rotation_amplitude_deg: float = 25.0
    rotation_freq_hz: float = 0.2
    curl_freq_hz: float = 0.3
    max_joint_speed_mm: float = 15.0
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        if self.n_views < 1 or self.n_frames < 1:
            raise InvalidParams("n_views and n_frames must be >= 1")
        if self.fps <= 0:
            raise InvalidParams("fps must be positive")


def hand_pose(curl, R, origin) -> np.ndarray:
    """Forward kinematics: 21 joints for per-finger curl in [0, 1], rotation and wrist origin."""
    joints = np.zeros((NUM_JOINTS, 3))
    for f, (base, spread, bones, max_flex) in enumerate(_FINGERS):
        phi = np.deg2rad(spread)
        direction = np.array([np.sin(phi), np.cos(phi), 0.0])
        axis = np.array([np.cos(phi), -np.sin(phi), 0.0])
        p = np.array(base)
        idx = 1 + 4 * f
        joints[idx] = p
        angle = 0.0
        for k in range(3):
            angle += curl[f] * np.deg2rad(max_flex[k])
            p = p + bones[k] * (axis_angle(axis, angle) @ direction)
            joints[idx + k + 1] = p
    return joints @ R.T + origin


def bone_pairs() -> list[tuple[int, int]]:
    pairs = []
    for f in range(5):
        idx = 1 + 4 * f
        pairs.append((0, idx))
        pairs.extend((idx + k, idx + k + 1) for k in range(3))
    return pairs


def _rotation(angles) -> np.ndarray:
    rx = axis_angle((1.0, 0.0, 0.0), angles[0])
    ry = axis_angle((0.0, 1.0, 0.0), angles[1])
    rz = axis_angle((0.0, 0.0, 1.0), angles[2])
    return rz @ ry @ rx


def generate_trajectory(scenario: SimScenario = SimScenario()) -> list[Skeleton]:
    """Ground-truth world skeletons: a rigid-bone hand drifting along a smooth path."""
    g = rng(scenario.seed, STREAM_TRAJECTORY)
    root_phase = g.uniform(0, 2 * np.pi, size=(3, len(scenario.root_freqs_hz)))
    root_weight = g.uniform(0.5, 1.0, size=(3, len(scenario.root_freqs_hz)))
    rot_phase = g.uniform(0, 2 * np.pi, size=3)
    curl_phase = g.uniform(0, 2 * np.pi, size=5)

    rest = hand_pose(np.zeros(5), np.eye(3), np.zeros(3))
    centroid = rest.mean(axis=0)
    freqs = np.asarray(scenario.root_freqs_hz)
    amp_rot = np.deg2rad(scenario.rotation_amplitude_deg)
    root_scale = scenario.root_amplitude_mm / len(freqs)

    seq = []
    for i in range(scenario.n_frames):
        t = i / scenario.fps
        path = root_scale * np.sum(root_weight * np.sin(2 * np.pi * freqs * t + root_phase), axis=1)
        R = _rotation(amp_rot * np.sin(2 * np.pi * scenario.rotation_freq_hz * t + rot_phase))
        curl = 0.35 - 0.35 * np.cos(2 * np.pi * scenario.curl_freq_hz * t + curl_phase)
        seq.append(Skeleton(hand_pose(curl, R, path - R @ centroid), WORLD))

    if len(seq) > 1:
        joints = np.stack([s.joints for s in seq])
        speed = np.linalg.norm(np.diff(joints, axis=0), axis=2).max()
        if speed > scenario.max_joint_speed_mm:
            raise InvalidParams(
                f"trajectory moves {speed:.2f} mm/frame, above the {scenario.max_joint_speed_mm} limit"
            )
    return seq


def generate_rig(scenario: SimScenario = SimScenario(), gt=None) -> list[CameraModel]:
    """Cameras on an arc facing the trajectory volume.

    When ``gt`` is given, every joint of every frame must project in front
    of and inside every camera, or :class:`InfeasibleRig` is raised.
    """
    width, height = scenario.image_size
    intr = Intrinsics(scenario.focal_px, scenario.focal_px, width / 2, height / 2, width, height)
    n = scenario.n_views
    cams = []
    for v in range(n):
        g = rng(scenario.seed, STREAM_RIG, v)
        jitter = g.uniform(-1.0, 1.0, size=3)
        frac = 0.5 if n == 1 else v / (n - 1)
        azimuth = np.deg2rad(-scenario.rig_arc_deg / 2 + frac * scenario.rig_arc_deg)
        azimuth += np.deg2rad(scenario.rig_jitter_deg) * jitter[0]
        elevation = np.deg2rad(scenario.rig_jitter_deg) * jitter[1]
        radius = scenario.rig_radius_mm * (1.0 + 0.05 * jitter[2])
        center = radius * np.array(
            [np.sin(azimuth) * np.cos(elevation), np.sin(elevation), -np.cos(azimuth) * np.cos(elevation)]
        )
        ext = look_at(center, np.zeros(3))
        while True:
            k = g.uniform(-1.0, 1.0, size=2) * (0.03, 0.01)
            try:
                dist = FisheyeDistortion(float(k[0]), float(k[1]), 0.0, 0.0)
                break
            except InvalidParams:
                continue
        cams.append(CameraModel(f"cam{v}", intr, ext, dist))
    if gt is not None:
        check_visibility(cams, gt)
    return cams


def check_visibility(cams, gt) -> None:
    joints = np.concatenate([s.joints for s in gt])
    for cam in cams:
        local = joints @ cam.extrinsics.R.T + cam.extrinsics.t
        if np.any(local[:, 2] <= 1e-9):
            raise InfeasibleRig(f"{cam.view_id}: joints behind the camera")
        px = project(local, cam.intrinsics)
        w, h = cam.intrinsics.width, cam.intrinsics.height
        if np.any((px < 0) | (px > (w - 1, h - 1))):
            raise InfeasibleRig(f"{cam.view_id}: joints project outside the image")


def corrupt(gt, rig, noise: NoiseModel = NoiseModel()) -> dict[str, list[Skeleton]]:
    """Noisy camera-frame predictions per view.

    Each view-frame gets i.i.d. Gaussian joint noise; with probability
    ``noise.outlier_prob`` it is also treated as occluded and displaced by
    an offset whose magnitude is uniform in ``noise.outlier_range_mm``.
    """
    lo, hi = noise.outlier_range_mm
    out = {}
    for v, cam in enumerate(rig):
        seq = []
        for f, s in enumerate(gt):
            g = rng(noise.seed, STREAM_NOISE, v, f)
            j = s.num_joints
            gauss = g.standard_normal((j, 3))
            occluded = g.random() < noise.outlier_prob
            direction = g.standard_normal(3)
            magnitude = g.uniform(lo, hi)
            joint_mask = g.random(j) < 0.5
            cam_s = to_camera(s, cam.extrinsics, cam.view_id)
            joints = cam_s.joints + noise.gaussian_sigma_mm * gauss
            if occluded:
                offset = magnitude * direction / np.linalg.norm(direction)
                if noise.occlusion_mode == "rigid":
                    joints = joints + offset
                else:
                    joints = joints + joint_mask[:, None] * offset
            seq.append(cam_s.with_joints(joints))
        out[cam.view_id] = seq
    return out


@dataclass(frozen=True)
class BenchmarkRow:
    row_id: str
    method: str
    mpjpe: float
    pa_mpjpe: float


@dataclass(frozen=True)
class BenchmarkReport:
    rows: tuple[BenchmarkRow, ...]
    config: dict
    branches: dict

    def row(self, row_id: str) -> BenchmarkRow:
        for r in self.rows:
            if r.row_id == row_id:
                return r
        raise KeyError(row_id)

    @property
    def single_view_rows(self) -> list[BenchmarkRow]:
        return [r for r in self.rows if r.row_id.startswith("view:")]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "branches": self.branches,
            "rows": [asdict(r) for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        lines = [f"{'ID':<14} {'method':<35} {'MPJPE(mm)':>9}  {'PA-MPJPE(mm)':>12}"]
        for r in self.rows:
            lines.append(f"{r.row_id:<14} {r.method:<35} {r.mpjpe:9.3f}  {r.pa_mpjpe:12.3f}")
        lines.append("branches: " + ", ".join(f"{k}={v}" for k, v in self.branches.items()))
        return "\n".join(lines) + "\n"


def world_predictions(preds, rig) -> dict[str, list[Skeleton]]:
    ext = {cam.view_id: cam.extrinsics for cam in rig}
    return {v: [to_world(s, ext[v]) for s in seq] for v, seq in preds.items()}


def fuse_views(world_preds, cfg: FusionConfig, sg: SavGolParams | None):
    """Merge (and optionally smooth) per-view world predictions of one video."""
    views = list(world_preds)
    n = len(next(iter(world_preds.values())))
    frames = [(f, [(v, world_preds[v][f]) for v in views]) for f in range(n)]
    merged, decisions = merge_sequence(frames, cfg)
    if sg is not None:
        merged = smooth_skeleton_sequence(merged, sg)
    return merged, decisions


def run_benchmark(
    scenario: SimScenario = SimScenario(),
    cfg: FusionConfig = FusionConfig(),
    sg: SavGolParams = SavGolParams(),
) -> BenchmarkReport:
    """Ablation table on simulated data: single views, merge, smoothing, two-run ensemble."""
    gt = generate_trajectory(scenario)
    rig = generate_rig(scenario, gt)
    world = world_predictions(corrupt(gt, rig, scenario.noise), rig)

    rows = []
    for v, seq in world.items():
        m = sequence_metrics(seq, gt, with_scale=cfg.pa_with_scale)
        rows.append(BenchmarkRow(f"view:{v}", f"single view {v}", m.mpjpe, m.pa_mpjpe))

    merged, decisions = fuse_views(world, cfg, None)
    m = sequence_metrics(merged, gt, with_scale=cfg.pa_with_scale)
    rows.append(BenchmarkRow("merge", "multi-view merge", m.mpjpe, m.pa_mpjpe))

    smoothed = smooth_skeleton_sequence(merged, sg)
    m = sequence_metrics(smoothed, gt, with_scale=cfg.pa_with_scale)
    rows.append(BenchmarkRow("merge+smooth", "merge + smooth", m.mpjpe, m.pa_mpjpe))

    second_noise = replace(scenario.noise, seed=scenario.noise.seed + 1)
    world_b = world_predictions(corrupt(gt, rig, second_noise), rig)
    smoothed_b, _ = fuse_views(world_b, cfg, sg)
    ensembled = ensemble_sequences([("sim", smoothed), ("sim", smoothed_b)], cfg)
    m = sequence_metrics(ensembled, gt, with_scale=cfg.pa_with_scale)
    rows.append(BenchmarkRow("ensemble", "merge + smooth + two-run ensemble", m.mpjpe, m.pa_mpjpe))

    config = {
        "scenario": asdict(scenario),
        "fusion": cfg.to_dict(),
        "smoothing": {"window": sg.window, "polyorder": sg.polyorder},
    }
    return BenchmarkReport(tuple(rows), config, branch_histogram(decisions))
