import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_rotation, random_skeleton
from egohand.errors import DataError, FrameMismatch, JointCountMismatch, LengthMismatch
from egohand.geometry import WORLD, Skeleton, axis_angle, camera_frame
from egohand.metrics import mpjpe, pa_mpjpe, sequence_metrics, umeyama_align
from oracles import brute_mpjpe, horn_similarity


def test_mpjpe_examples(rng):
    a = random_skeleton(rng)
    assert mpjpe(a, a) == 0.0
    b = a.with_joints(a.joints + [3.0, 0.0, 0.0])
    assert mpjpe(a, b) == pytest.approx(3.0, abs=1e-12)


def test_mpjpe_matches_brute_force(rng):
    for _ in range(50):
        a, b = random_skeleton(rng), random_skeleton(rng)
        assert abs(mpjpe(a, b) - brute_mpjpe(a.joints, b.joints)) < 1e-9


def test_mpjpe_symmetric_and_translation_covariant(rng):
    for _ in range(100):
        a, b = random_skeleton(rng), random_skeleton(rng)
        assert mpjpe(a, b) == mpjpe(b, a)
        off = rng.uniform(-1000, 1000, 3)
        moved = mpjpe(a.with_joints(a.joints + off), b.with_joints(b.joints + off))
        assert abs(moved - mpjpe(a, b)) < 1e-9


def test_mpjpe_checks_tags():
    a = Skeleton(np.zeros((21, 3)))
    with pytest.raises(FrameMismatch):
        mpjpe(a, Skeleton(np.zeros((21, 3)), camera_frame("x")))
    with pytest.raises(JointCountMismatch):
        mpjpe(a, Skeleton(np.zeros((20, 3))))


def test_umeyama_identity(rng):
    s = random_skeleton(rng)
    T = umeyama_align(s, s)
    assert T.scale == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(T.R, np.eye(3), atol=1e-9)
    np.testing.assert_allclose(T.t, 0.0, atol=1e-9)


def test_umeyama_exact_recovery(rng):
    src = random_skeleton(rng)
    Rz = axis_angle([0, 0, 1], np.pi / 2)
    dst = src.with_joints(2.0 * src.joints @ Rz.T + 5.0)
    T = umeyama_align(src, dst)
    assert T.scale == pytest.approx(2.0, abs=1e-9)
    np.testing.assert_allclose(T.R, Rz, atol=1e-9)
    assert np.max(np.abs(T.apply(src.joints) - dst.joints)) < 1e-9


def test_umeyama_excludes_reflection(rng):
    src = random_skeleton(rng)
    dst = src.with_joints(src.joints * [1.0, 1.0, -1.0])
    T = umeyama_align(src, dst)
    assert np.linalg.det(T.R) == pytest.approx(1.0, abs=1e-9)


def test_umeyama_residual_matches_horn_oracle(rng):
    for _ in range(200):
        src = random_skeleton(rng)
        R = random_rotation(rng)
        dst = src.with_joints(rng.uniform(0.5, 2) * src.joints @ R.T + rng.uniform(-1000, 1000, 3) + rng.normal(scale=5, size=(21, 3)))
        T = umeyama_align(src, dst)
        rss = float(np.sum((T.apply(src.joints) - dst.joints) ** 2))
        *_, oracle_rss = horn_similarity(src.joints, dst.joints)
        assert abs(rss - oracle_rss) < 1e-9


@pytest.mark.parametrize(
    "joints",
    [np.zeros((21, 3)), np.outer(np.arange(21.0), [1.0, 2.0, 3.0])],
    ids=["coincident", "collinear"],
)
def test_umeyama_degenerate_fallback(joints, rng):
    src = Skeleton(joints)
    dst = random_skeleton(rng)
    T = umeyama_align(src, dst)
    assert T.degenerate
    assert T.scale == 1.0
    np.testing.assert_array_equal(T.R, np.eye(3))
    np.testing.assert_allclose(T.t, dst.joints.mean(0) - src.joints.mean(0))


def test_umeyama_needs_three_joints():
    with pytest.raises(DataError):
        umeyama_align(Skeleton(np.eye(3)[:2]), Skeleton(np.eye(3)[:2]))


def test_pa_mpjpe_examples(rng):
    gt = random_skeleton(rng)
    assert pa_mpjpe(gt, gt) < 1e-9
    R = random_rotation(rng)
    pred = gt.with_joints(1.7 * gt.joints @ R.T + [10.0, -20.0, 300.0])
    assert pa_mpjpe(pred, gt) < 1e-6


def test_pa_mpjpe_rms_not_worse_than_unaligned(rng):
    for _ in range(100):
        gt = random_skeleton(rng)
        pred = gt.with_joints(gt.joints + rng.normal(scale=10, size=gt.joints.shape) + rng.normal(scale=20, size=3))
        T = umeyama_align(pred, gt)
        aligned = np.sqrt(np.mean(np.sum((T.apply(pred.joints) - gt.joints) ** 2, axis=1)))
        raw = np.sqrt(np.mean(np.sum((pred.joints - gt.joints) ** 2, axis=1)))
        assert aligned <= raw + 1e-9


def test_pa_mpjpe_without_scale(rng):
    gt = random_skeleton(rng)
    pred = gt.with_joints(2.0 * gt.joints)
    assert pa_mpjpe(pred, gt) < 1e-6
    assert pa_mpjpe(pred, gt, with_scale=False) > 1.0


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    scale=st.floats(0.5, 2.0),
    shift=st.tuples(*[st.floats(-1000, 1000)] * 3),
)
def test_pa_mpjpe_similarity_invariant(seed, scale, shift):
    g = np.random.default_rng(seed)
    gt = random_skeleton(g)
    pred = gt.with_joints(gt.joints + g.normal(scale=8, size=(21, 3)))
    R = random_rotation(g)
    moved = pred.with_joints(scale * pred.joints @ R.T + np.array(shift))
    assert abs(pa_mpjpe(moved, gt) - pa_mpjpe(pred, gt)) < 1e-6


def test_sequence_metrics_examples(rng):
    gt = [random_skeleton(rng) for _ in range(3)]
    rep = sequence_metrics(gt, gt)
    assert rep.mpjpe == 0.0 and all(v == 0.0 for v in rep.per_frame)
    pred = [gt[0].with_joints(gt[0].joints + [0, 3.0, 0]), gt[1], gt[2]]
    rep = sequence_metrics(pred, gt)
    assert rep.mpjpe == pytest.approx(1.0, abs=1e-12)
    assert rep.per_frame == pytest.approx((3.0, 0.0, 0.0), abs=1e-12)
    assert rep.mpjpe == pytest.approx(np.mean(rep.per_joint), abs=1e-12)


def test_sequence_metrics_matches_brute_force(rng):
    gt = [random_skeleton(rng) for _ in range(30)]
    pred = [g.with_joints(g.joints + rng.normal(scale=5, size=(21, 3))) for g in gt]
    rep = sequence_metrics(pred, gt)
    frames = [brute_mpjpe(p.joints, g.joints) for p, g in zip(pred, gt)]
    assert max(abs(a - b) for a, b in zip(rep.per_frame, frames)) < 1e-9
    assert abs(rep.mpjpe - sum(frames) / len(frames)) < 1e-9
    assert all(v >= 0 for v in rep.per_frame_pa)


def test_sequence_metrics_length_mismatch(rng):
    s = random_skeleton(rng)
    with pytest.raises(LengthMismatch):
        sequence_metrics([s, s], [s])
