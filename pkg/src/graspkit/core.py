"""Geometric primitives, grasp and gripper types, and frame transforms.

Conventions
-----------
Points and vectors are ``(3,)`` float64 arrays, clouds are ``(N, 3)``.
A grasp rotation stores the gripper axes as columns:

* column 0 -- approach axis (gripper x), pointing from the hand into the object
* column 1 -- closing axis (gripper y), the direction the jaws move along
* column 2 -- finger-height axis (gripper z)

Local coordinates of a world point ``p`` under a pose are ``R.T @ (p - center)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import PreconditionError

WORLD_UP = np.array([0.0, 0.0, 1.0])
WORLD_X = np.array([1.0, 0.0, 0.0])
UP_FALLBACK_TOL = 1e-6
UNIT_TOL = 1e-9


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


def as_point(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(p)):
        raise PreconditionError(f"point has non-finite coordinates: {p}")
    return p


def as_unit(v, tol: float = UNIT_TOL) -> np.ndarray:
    v = as_point(v)
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise PreconditionError(f"vector is not unit-norm: {v}")
    return v


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise PreconditionError("cannot normalize a zero vector")
    return v / n


def check_rotation(r, tol: float = UNIT_TOL) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64).reshape(3, 3)
    if not np.allclose(r.T @ r, np.eye(3), atol=tol, rtol=0.0):
        raise PreconditionError("rotation is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise PreconditionError("rotation determinant is not +1")
    return r


def rotation_about(axis, angle: float) -> np.ndarray:
    """Right-handed rotation matrix about a (normalized) axis, Rodrigues form."""
    k = normalize(axis)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * kx + (1.0 - math.cos(angle)) * (kx @ kx)


def euler_xyz(degrees: Sequence[float]) -> np.ndarray:
    """Rotation from extrinsic x-y-z Euler angles in degrees (``Rz @ Ry @ Rx``)."""
    rx, ry, rz = (math.radians(float(a)) for a in degrees)
    return rotation_about(WORLD_UP, rz) @ rotation_about([0, 1, 0], ry) @ rotation_about(WORLD_X, rx)


def local_coords(points, center, rotation) -> np.ndarray:
    """Vectorized ``R.T @ (p - c)`` for an ``(N, 3)`` array.

    Written out element-wise so that every caller gets bit-identical results
    regardless of BLAS dispatch.
    """
    d = np.asarray(points, dtype=np.float64).reshape(-1, 3) - np.asarray(center, dtype=np.float64)
    r = np.asarray(rotation, dtype=np.float64)
    out = np.empty_like(d)
    for k in range(3):
        out[:, k] = d[:, 0] * r[0, k] + d[:, 1] * r[1, k] + d[:, 2] * r[2, k]
    return out


@dataclass(frozen=True)
class GripperModel:
    """Parallel-jaw gripper geometry, all lengths in meters.

    The fingers span ``depth - finger_length < x < depth`` in the grasp frame and
    the base (palm) box sits directly behind them, ``base_depth`` thick.
    """

    max_width: float = 0.10
    finger_length: float = 0.06
    finger_thickness: float = 0.01
    finger_height: float = 0.02
    base_depth: float = 0.02
    depth_set: tuple = (0.01, 0.02, 0.03, 0.04)

    def __post_init__(self):
        object.__setattr__(self, "depth_set", tuple(float(d) for d in self.depth_set))
        for name in ("max_width", "finger_length", "finger_thickness", "finger_height", "base_depth"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise PreconditionError(f"gripper {name} must be positive, got {v}")
        ds = self.depth_set
        if not ds or any(d <= 0 for d in ds):
            raise PreconditionError("gripper depth_set must be non-empty and positive")
        if any(b <= a for a, b in zip(ds, ds[1:])):
            raise PreconditionError("gripper depth_set must be strictly increasing")
        if ds[-1] > self.finger_length:
            raise PreconditionError("max(depth_set) exceeds finger_length")

    def as_dict(self) -> dict:
        return {
            "max_width": self.max_width,
            "finger_length": self.finger_length,
            "finger_thickness": self.finger_thickness,
            "finger_height": self.finger_height,
            "base_depth": self.base_depth,
            "depth_set": list(self.depth_set),
        }

    def has_depth(self, depth: float, tol: float = 1e-12) -> bool:
        return any(abs(depth - d) <= tol for d in self.depth_set)


@dataclass(frozen=True, eq=False)
class GraspPose:
    center: np.ndarray
    rotation: np.ndarray
    width: float
    depth: float
    score: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(as_point(self.center)))
        object.__setattr__(self, "rotation", _frozen(check_rotation(self.rotation)))
        object.__setattr__(self, "width", float(self.width))
        object.__setattr__(self, "depth", float(self.depth))
        object.__setattr__(self, "score", float(self.score))
        if self.width < 0:
            raise PreconditionError(f"negative grasp width {self.width}")
        if not (0.0 <= self.score <= 1.1 + 1e-12):
            raise PreconditionError(f"grasp score {self.score} outside [0, 1.1]")

    @property
    def approach(self) -> np.ndarray:
        return self.rotation[:, 0]

    @property
    def closing(self) -> np.ndarray:
        return self.rotation[:, 1]

    def validate(self, gripper: GripperModel) -> "GraspPose":
        if self.width > gripper.max_width + 1e-12:
            raise PreconditionError(f"width {self.width} exceeds gripper max width {gripper.max_width}")
        if not gripper.has_depth(self.depth):
            raise PreconditionError(f"depth {self.depth} not in gripper depth set {gripper.depth_set}")
        return self

    def with_(self, **changes) -> "GraspPose":
        return replace(self, **changes)

    def __eq__(self, other):
        if not isinstance(other, GraspPose):
            return NotImplemented
        return (
            np.array_equal(self.center, other.center)
            and np.array_equal(self.rotation, other.rotation)
            and self.width == other.width
            and self.depth == other.depth
            and self.score == other.score
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LabeledCloud:
    """Points with unit outward normals, object labels and optional graspness.

    Label ``-1`` is table/background; objects use ``0 .. n_objects - 1``
    (any non-negative integers are accepted).
    """

    points: np.ndarray
    normals: np.ndarray
    labels: np.ndarray = None
    graspness: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        nrm = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        n = len(pts)
        if len(nrm) != n:
            raise PreconditionError("points and normals differ in length")
        if not np.all(np.isfinite(pts)):
            raise PreconditionError("cloud contains non-finite coordinates")
        if n and np.max(np.abs(np.linalg.norm(nrm, axis=1) - 1.0)) > 1e-6:
            raise PreconditionError("cloud normals must be unit length")
        labels = np.full(n, -1, dtype=np.int64) if self.labels is None else np.asarray(self.labels)
        labels = labels.astype(np.int64).reshape(-1)
        if len(labels) != n:
            raise PreconditionError("labels differ in length from points")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "normals", _frozen(nrm))
        object.__setattr__(self, "labels", _frozen(labels, np.int64))
        if self.graspness is not None:
            g = np.asarray(self.graspness, dtype=np.float64).reshape(-1)
            if len(g) != n:
                raise PreconditionError("graspness differs in length from points")
            if n and (np.any(g < 0) or np.any(g > 1) or not np.all(np.isfinite(g))):
                raise PreconditionError("graspness values must lie in [0, 1]")
            object.__setattr__(self, "graspness", _frozen(g))

    def __len__(self):
        return len(self.points)

    @property
    def object_labels(self) -> np.ndarray:
        return np.unique(self.labels[self.labels >= 0])

    def with_graspness(self, graspness) -> "LabeledCloud":
        return LabeledCloud(self.points, self.normals, self.labels, graspness)

    def with_labels(self, labels) -> "LabeledCloud":
        return LabeledCloud(self.points, self.normals, labels, self.graspness)

    def transformed(self, rotation, translation=(0.0, 0.0, 0.0)) -> "LabeledCloud":
        r = np.asarray(rotation, dtype=np.float64)
        return LabeledCloud(
            self.points @ r.T + np.asarray(translation, dtype=np.float64),
            self.normals @ r.T,
            self.labels,
            self.graspness,
        )


def to_local(pose: GraspPose, p) -> np.ndarray:
    """World point (or ``(N, 3)`` array) to the gripper frame of ``pose``."""
    p = np.asarray(p, dtype=np.float64)
    out = local_coords(p, pose.center, pose.rotation)
    return out[0] if p.ndim == 1 else out


def to_world(pose: GraspPose, q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    out = q.reshape(-1, 3) @ pose.rotation.T + pose.center
    return out[0] if q.ndim == 1 else out


def canonical_frame(approach, world=None) -> np.ndarray:
    """Rotation whose column 0 is ``approach`` and in-plane angle is zero.

    Column 1 is ``normalize(up x approach)``. When ``approach`` is within
    ``UP_FALLBACK_TOL`` of ``+-up`` the x axis is used as reference instead.
    ``world`` optionally rotates the reference frame (its columns are the
    x/y/z axes), which lets a whole scene and its lattice be rotated jointly.
    """
    a = as_unit(approach)
    if world is None:
        up, xref = WORLD_UP, WORLD_X
    else:
        world = np.asarray(world, dtype=np.float64)
        up, xref = world[:, 2], world[:, 0]
    ref = up
    if np.linalg.norm(a - up) < UP_FALLBACK_TOL or np.linalg.norm(a + up) < UP_FALLBACK_TOL:
        ref = xref
    b = normalize(np.cross(ref, a))
    c = np.cross(a, b)
    return np.column_stack([a, b, c])


def in_plane_pose(approach, angle: float, world=None) -> np.ndarray:
    """Full grasp rotation from an approach vector and in-plane angle (radians).

    Increasing ``angle`` rotates columns 1-2 right-handedly about column 0.
    """
    base = canonical_frame(approach, world)
    ca, sa = math.cos(angle), math.sin(angle)
    b, c = base[:, 1], base[:, 2]
    return np.column_stack([base[:, 0], ca * b + sa * c, -sa * b + ca * c])


def geodesic_angle(r1, r2) -> float:
    """Rotation angle of ``r1.T @ r2`` in radians."""
    cos = (np.trace(np.asarray(r1).T @ np.asarray(r2)) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, cos)))
