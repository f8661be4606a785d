import numpy as np
import pytest

from egohand.errors import InvalidParams
from egohand.geometry import WORLD, Skeleton
from egohand.preprocess import FisheyeDistortion

ACCEPTANCE_LINES = []


def random_skeleton(rng, n_joints=21, spread=80.0, frame=WORLD, offset=None):
    joints = rng.normal(scale=spread, size=(n_joints, 3))
    if offset is not None:
        joints = joints + offset
    return Skeleton(joints, frame)


def random_rotation(rng):
    q = rng.normal(size=4)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_valid_distortion(g, bound=0.05):
    """Uniform ``|k_i| <= bound`` lens, redrawn until it is monotone below 80 degrees."""
    while True:
        k = g.uniform(-bound, bound, 4)
        try:
            return FisheyeDistortion(*k)
        except InvalidParams:
            continue


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
