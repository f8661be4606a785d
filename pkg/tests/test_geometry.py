import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_rotation, random_skeleton
from egohand.errors import DataError, FrameMismatch, NonPositiveDepth
from egohand.geometry import (
    WORLD,
    Extrinsics,
    Intrinsics,
    Skeleton,
    camera_frame,
    is_rotation,
    look_at,
    project,
    rotation_between,
    rotation_error,
    to_camera,
    to_world,
    unproject,
)

INTR = Intrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)


def test_project_examples():
    np.testing.assert_array_equal(project([0, 0, 1000], INTR), [320, 240])
    np.testing.assert_array_equal(project([100, 0, 1000], INTR), [370, 240])


def test_unproject_examples():
    np.testing.assert_array_equal(unproject([320, 240], 500, INTR), [0, 0, 500])
    np.testing.assert_array_equal(unproject([370, 240], 1000, INTR), [100, 0, 1000])


@pytest.mark.parametrize("z", [0.0, -5.0, 1e-10])
def test_nonpositive_depth(z):
    with pytest.raises(NonPositiveDepth):
        project([1, 2, z], INTR)
    with pytest.raises(NonPositiveDepth):
        unproject([1, 2], z, INTR)


def test_project_unproject_roundtrip_seeded():
    rng = np.random.default_rng(0)
    p = np.column_stack([rng.uniform(-500, 500, 1000), rng.uniform(-500, 500, 1000), rng.uniform(50, 2000, 1000)])
    back = unproject(project(p, INTR), p[:, 2], INTR)
    assert np.max(np.abs(back - p)) < 1e-9


def test_intrinsics_validation():
    with pytest.raises(DataError):
        Intrinsics(0.0, 1.0, 1, 1, 10, 10)
    with pytest.raises(DataError):
        Intrinsics(1.0, 1.0, 10, 1, 10, 10)


def test_to_world_examples():
    s = Skeleton([[0, 0, 100], [1, 2, 3]], camera_frame("a"))
    ident = to_world(s, Extrinsics())
    np.testing.assert_array_equal(ident.joints, s.joints)
    assert ident.frame == WORLD
    shifted = to_world(s, Extrinsics(np.eye(3), [0, 0, 100]))
    np.testing.assert_array_equal(shifted.joints[0], [0, 0, 0])


def test_to_world_rejects_world_frame():
    with pytest.raises(FrameMismatch):
        to_world(Skeleton(np.zeros((2, 3))), Extrinsics())
    with pytest.raises(FrameMismatch):
        to_camera(Skeleton(np.zeros((2, 3)), camera_frame("a")), Extrinsics(), "a")


def test_rigid_roundtrip_seeded():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        ext = Extrinsics(random_rotation(rng), rng.uniform(-1000, 1000, 3))
        s = random_skeleton(rng, spread=300.0)
        back = to_world(to_camera(s, ext, "v"), ext)
        worst = max(worst, np.max(np.abs(back.joints - s.joints)))
    assert worst < 1e-9


def test_extrinsics_reject_non_rotation():
    with pytest.raises(DataError):
        Extrinsics(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(DataError):
        Extrinsics(np.eye(3) * 1.001)


def test_skeleton_is_immutable():
    s = Skeleton(np.zeros((21, 3)))
    with pytest.raises(ValueError):
        s.joints[0, 0] = 1.0
    with pytest.raises(DataError):
        Skeleton(np.full((2, 3), np.nan))
    with pytest.raises(DataError):
        Skeleton(np.zeros((0, 3)))


def test_rotation_between_examples():
    np.testing.assert_array_equal(rotation_between([0, 0, 1], [0, 0, 1]), np.eye(3))
    R = rotation_between([1, 0, 0], [0, 1, 0])
    np.testing.assert_allclose(R, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)


def test_rotation_between_antiparallel():
    for a in ([1.0, 0, 0], [0, 0, 1.0], np.array([1.0, 2.0, 3.0]) / np.sqrt(14)):
        a = np.asarray(a)
        R = rotation_between(a, -a)
        assert is_rotation(R)
        np.testing.assert_allclose(R @ a, -a, atol=1e-12)
    # deterministic choice of axis
    np.testing.assert_array_equal(rotation_between([0, 0, 1.0], [0, 0, -1.0]), rotation_between([0, 0, 1.0], [0, 0, -1.0]))


def test_rotation_between_rejects_non_unit():
    with pytest.raises(DataError):
        rotation_between([2.0, 0, 0], [0, 1.0, 0])


unit = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 1e-3).map(lambda v: np.array(v) / np.linalg.norm(v))


@settings(max_examples=300, deadline=None)
@given(unit, unit)
def test_rotation_between_property(a, b):
    R = rotation_between(a, b)
    assert rotation_error(R) < 1e-9
    if np.arccos(np.clip(a @ b, -1, 1)) < np.pi - 1e-6:
        assert np.max(np.abs(R @ a - b)) < 1e-9


def test_rotation_between_seeded_near_antipodal():
    rng = np.random.default_rng(2)
    for _ in range(500):
        a = rng.normal(size=3)
        a /= np.linalg.norm(a)
        b = -a + rng.normal(scale=1e-5, size=3)
        b /= np.linalg.norm(b)
        R = rotation_between(a, b)
        assert rotation_error(R) < 1e-9
        if np.arccos(np.clip(a @ b, -1, 1)) < np.pi - 1e-6:
            assert np.max(np.abs(R @ a - b)) < 1e-9


def test_look_at_points_axis_at_target():
    ext = look_at([300.0, 50.0, -400.0], [0, 0, 0])
    p = ext.R @ np.zeros(3) + ext.t
    np.testing.assert_allclose(p[:2], 0, atol=1e-12)
    assert p[2] > 0
