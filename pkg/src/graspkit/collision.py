"""Three-box parallel-jaw gripper versus point cloud collision test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GraspPose, GripperModel, local_coords
from .spatial import SpatialIndex, ball_query


@dataclass(frozen=True, eq=False)
class OrientedBox:
    center: np.ndarray
    rotation: np.ndarray
    half_extents: np.ndarray

    def contains(self, points) -> np.ndarray:
        """Strict-interior membership for an ``(N, 3)`` array."""
        q = local_coords(points, self.center, self.rotation)
        return np.all(np.abs(q) < self.half_extents, axis=1)

    def corners(self) -> np.ndarray:
        signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
        return self.center + (signs * self.half_extents) @ self.rotation.T


@dataclass(frozen=True)
class CollisionReport:
    colliding: bool
    offending_count: int
    inner_count: int
    admissible: bool


def gripper_boxes(pose: GraspPose, gripper: GripperModel) -> tuple:
    """Left finger, right finger and base boxes for ``pose``.

    In the grasp frame the fingers occupy ``depth - finger_length < x < depth``
    just outside ``|y| = width / 2``; the base spans both fingers directly behind
    them.
    """
    w, d = pose.width, pose.depth
    L, t, h, B = gripper.finger_length, gripper.finger_thickness, gripper.finger_height, gripper.base_depth
    xf = d - L / 2.0
    local = [
        (np.array([xf, -(w / 2.0 + t / 2.0), 0.0]), np.array([L / 2.0, t / 2.0, h / 2.0])),
        (np.array([xf, w / 2.0 + t / 2.0, 0.0]), np.array([L / 2.0, t / 2.0, h / 2.0])),
        (np.array([d - L - B / 2.0, 0.0, 0.0]), np.array([B / 2.0, w / 2.0 + t, h / 2.0])),
    ]
    R = pose.rotation
    return tuple(OrientedBox(pose.center + R @ c, R, he) for c, he in local)


def inner_mask(local, width: float, depth: float, gripper: GripperModel) -> np.ndarray:
    """Points (grasp-frame coordinates) strictly inside the jaw gap."""
    x, y, z = local[:, 0], local[:, 1], local[:, 2]
    return (
        (x > depth - gripper.finger_length)
        & (x < depth)
        & (np.abs(z) < gripper.finger_height / 2.0)
        & (np.abs(y) < width / 2.0)
    )


def reach_radius(pose: GraspPose, gripper: GripperModel) -> float:
    """Radius around the pose center enclosing all gripper boxes and the jaw gap."""
    corners = np.concatenate([b.corners() for b in gripper_boxes(pose, gripper)])
    return float(np.max(np.linalg.norm(corners - pose.center, axis=1)))


def check_collision(index: SpatialIndex, pose: GraspPose, gripper: GripperModel, min_inner: int = 1) -> CollisionReport:
    """Point-based collision label for a grasp.

    ``colliding`` is true iff some point lies strictly inside one of the three
    gripper boxes. A grasp is admissible iff it does not collide and at least
    ``min_inner`` points lie between the jaws.
    """
    r = reach_radius(pose, gripper)
    cand = ball_query(index, pose.center, r * (1.0 + 1e-9) + 1e-12)
    pts = index.points[cand]
    hit = np.zeros(len(cand), dtype=bool)
    for box in gripper_boxes(pose, gripper):
        hit |= box.contains(pts)
    n_hit = int(np.count_nonzero(hit))
    inner = int(np.count_nonzero(inner_mask(local_coords(pts, pose.center, pose.rotation), pose.width, pose.depth, gripper)))
    return CollisionReport(n_hit > 0, n_hit, inner, n_hit == 0 and inner >= min_inner)
