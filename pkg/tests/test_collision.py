import numpy as np
import pytest
from hypothesis import given, strategies as st

from graspkit.collision import check_collision, gripper_boxes
from graspkit.core import GraspPose, GripperModel, in_plane_pose
from graspkit.spatial import build_index

from conftest import cloud_from, down_pose, random_rotation

G = GripperModel()


def naive_report(points, pose, gripper, min_inner=1):
    """Point-in-box scan written directly from the box definitions."""
    R, c = pose.rotation, pose.center
    w, d = pose.width, pose.depth
    L, t, h, B = gripper.finger_length, gripper.finger_thickness, gripper.finger_height, gripper.base_depth
    hit = inner = 0
    for p in points:
        x, y, z = R.T @ (p - c)
        zin = abs(z) < h / 2
        finger = zin and d - L < x < d and w / 2 < abs(y) < w / 2 + t
        base = zin and d - L - B < x < d - L and abs(y) < w / 2 + t
        hit += finger or base
        inner += zin and d - L < x < d and abs(y) < w / 2
    return hit, inner, hit == 0 and inner >= min_inner


def test_finger_centers():
    pose = GraspPose((0, 0, 0), np.eye(3), 0.06, 0.02)
    left, right, base = gripper_boxes(pose, G)
    assert np.allclose(left.center, [0.02 - 0.03, -(0.03 + 0.005), 0])
    assert np.allclose(right.center, [0.02 - 0.03, 0.03 + 0.005, 0])
    assert np.allclose(base.center, [0.02 - 0.06 - 0.01, 0, 0])


def test_boxes_rotate_rigidly():
    rng = np.random.default_rng(0)
    R = random_rotation(rng)
    c = rng.random(3)
    a = gripper_boxes(GraspPose((0, 0, 0), np.eye(3), 0.05, 0.03), G)
    b = gripper_boxes(GraspPose(c, R, 0.05, 0.03), G)
    for x, y in zip(a, b):
        assert np.allclose(x.corners() @ R.T + c, y.corners(), atol=1e-15)


def test_gap_widens_with_width():
    a = gripper_boxes(GraspPose((0, 0, 0), np.eye(3), 0.03, 0.02), G)
    b = gripper_boxes(GraspPose((0, 0, 0), np.eye(3), 0.05, 0.02), G)
    gap = lambda boxes: (boxes[1].center[1] - boxes[1].half_extents[1]) - (boxes[0].center[1] + boxes[0].half_extents[1])
    assert abs(gap(b) - gap(a) - 0.02) < 1e-15


def test_empty_region_and_finger_hit():
    far = build_index(cloud_from([[5.0, 5.0, 5.0]]))
    pose = GraspPose((0, 0, 0), np.eye(3), 0.05, 0.02)
    rep = check_collision(far, pose, G)
    assert not rep.colliding and rep.inner_count == 0 and not rep.admissible
    assert check_collision(far, pose, G, min_inner=0).admissible
    left = gripper_boxes(pose, G)[0]
    rep = check_collision(build_index(cloud_from([left.center])), pose, G)
    assert rep.colliding and rep.offending_count == 1


def test_boundary_is_not_interior():
    pose = GraspPose((0, 0, 0), np.eye(3), 0.05, 0.02)
    # exactly on the inner plane of the right finger
    rep = check_collision(build_index(cloud_from([[0.0, 0.025, 0.0]])), pose, G)
    assert not rep.colliding and rep.inner_count == 0


@given(st.integers(0, 2**32 - 1))
def test_matches_naive_scan(seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-0.08, 0.08, (300, 3))
    idx = build_index(cloud_from(pts))
    for _ in range(5):
        pose = GraspPose(rng.uniform(-0.03, 0.03, 3), random_rotation(rng), rng.uniform(0, 0.1), G.depth_set[rng.integers(4)])
        rep = check_collision(idx, pose, G)
        hit, inner, ok = naive_report(pts, pose, G)
        assert (rep.offending_count, rep.inner_count, rep.admissible) == (hit, inner, ok)
        assert (rep.offending_count > 0) == rep.colliding


@given(st.integers(0, 2**32 - 1))
def test_rigid_invariance(seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-0.05, 0.05, (200, 3))
    pose = GraspPose((0, 0, 0), random_rotation(rng), 0.05, 0.02)
    R, t = random_rotation(rng), rng.random(3)
    a = check_collision(build_index(cloud_from(pts)), pose, G)
    moved = GraspPose(R @ pose.center + t, R @ pose.rotation, pose.width, pose.depth)
    b = check_collision(build_index(cloud_from(pts @ R.T + t)), moved, G)
    # boundary rounding aside, counts agree; random points sit on no boundary
    assert (a.offending_count, a.inner_count) == (b.offending_count, b.inner_count)


def test_shrinking_width_keeps_finger_collision():
    # a slab filling the right finger's whole sweep collides at every width
    R = np.column_stack([[0, 0, -1], [0, 1, 0], [1, 0, 0]])
    slab = [[x, y, z] for x in (-0.005, 0.0, 0.005) for y in np.arange(0.001, 0.06, 0.001) for z in (0.005, 0.01)]
    idx = build_index(cloud_from(slab))
    prev = True
    for w in (0.08, 0.06, 0.05, 0.04, 0.02, 0.005):
        hit = check_collision(idx, GraspPose([0, 0, 0.02], R, w, 0.02), G).colliding
        assert hit or not prev
        prev = hit
    assert prev
