import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from graspkit.core import GraspPose, GripperModel, LabeledCloud, in_plane_pose
from graspkit.scenegen import PrimitiveSpec, SceneSpec, TableSpec, build_scene

settings.register_profile("graspkit", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("graspkit")


def random_rotation(rng) -> np.ndarray:
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def cloud_from(points, normals=None, labels=None) -> LabeledCloud:
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if normals is None:
        normals = np.tile([0.0, 0.0, 1.0], (len(points), 1))
    return LabeledCloud(points, normals, labels)


def plate_pair(gap=0.04, half=0.01, step=0.002, tilt_deg=0.0):
    """Two square plates facing each other across the y axis, normals outward."""
    u = np.arange(-half, half + 1e-12, step)
    xx, zz = np.meshgrid(u, u, indexing="ij")
    xx, zz = xx.ravel(), zz.ravel()
    pts, nrm = [], []
    for s in (-1.0, 1.0):
        pts.append(np.column_stack([xx, np.full_like(xx, s * gap / 2), zz]))
        t = math.radians(tilt_deg)
        nrm.append(np.tile([math.sin(t), s * math.cos(t), 0.0], (len(xx), 1)))
    return LabeledCloud(np.concatenate(pts), np.concatenate(nrm), np.zeros(2 * len(xx), dtype=np.int64))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def three_primitive_cloud():
    """Small three-object scene used by the graspness property checks."""
    prims = (
        PrimitiveSpec("box", (0.04, 0.03, 0.05), (-0.05, 0.0, 0.025), (0, 0, 15), 0, 2.5e4),
        PrimitiveSpec("cylinder", (0.02, 0.06), (0.04, 0.03, 0.03), (0, 0, 0), 1, 2.5e4),
        PrimitiveSpec("sphere", (0.02,), (0.03, -0.05, 0.02), (0, 0, 0), 2, 2.5e4),
    )
    return build_scene(SceneSpec(prims, TableSpec((0.2, 0.2), (0.0, 0.0), 0.0, 1e4), 7))


def down_pose(center=(0, 0, 0), width=0.05, depth=0.02, angle=0.0, score=0.0):
    return GraspPose(center, in_plane_pose([0, 0, -1], angle), width, depth, score)


DEFAULT_GRIPPER = GripperModel()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
