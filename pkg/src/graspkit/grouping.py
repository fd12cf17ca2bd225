"""Multi-radii cylinder grouping around seed grasp points.

For a seed and grasp frame, neighbourhoods are gathered at several nested
radii, expressed in the gripper frame, scaled by their radius and stacked in
radius order into a fixed ``(len(radii) * nsample, 3)`` block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import GripperModel, as_point, check_rotation, local_coords
from .errors import PreconditionError
from .spatial import SpatialIndex, ball_query, cylinder_query

DEFAULT_RADII = (0.0125, 0.025, 0.0375, 0.05)
DEFAULT_NSAMPLE = 64


@dataclass(frozen=True)
class RadiiSchedule:
    radii: tuple = DEFAULT_RADII

    def __post_init__(self):
        r = tuple(float(x) for x in self.radii)
        object.__setattr__(self, "radii", r)
        if not r or r[0] <= 0 or any(b <= a for a, b in zip(r, r[1:])):
            raise PreconditionError(f"radii must be positive and strictly increasing: {r}")

    @classmethod
    def uniform(cls, gripper: GripperModel, count: int = 4) -> "RadiiSchedule":
        """Evenly spaced radii up to half the gripper's maximum opening."""
        step = gripper.max_width / 2.0 / count
        return cls(tuple(step * (k + 1) for k in range(count)))

    def validate(self, gripper: GripperModel) -> "RadiiSchedule":
        if self.radii[-1] > gripper.max_width / 2.0 + 1e-12:
            raise PreconditionError("largest radius exceeds half the gripper max width")
        return self


def default_h_range(gripper: GripperModel) -> tuple:
    return (-gripper.base_depth, gripper.depth_set[-1])


@dataclass(frozen=True, eq=False)
class Group:
    radius: float
    indices: np.ndarray  # (nsample,) padded member indices
    coords: np.ndarray  # (nsample, 3) local coordinates / radius
    members: np.ndarray  # all members before truncation, ascending

    @property
    def count(self) -> int:
        return len(self.members)


@dataclass(frozen=True, eq=False)
class GroupSet:
    seed: np.ndarray
    seed_index: int
    approach: np.ndarray
    groups: tuple

    @property
    def coords(self) -> np.ndarray:
        return np.concatenate([g.coords for g in self.groups])

    @property
    def indices(self) -> np.ndarray:
        return np.concatenate([g.indices for g in self.groups])


def group_single(
    index: SpatialIndex,
    seed,
    frame,
    r: float,
    h_range=(-0.02, 0.04),
    nsample: int = DEFAULT_NSAMPLE,
    shape: str = "cylinder",
    seed_index: int = -1,
) -> Group:
    """Neighbourhood of ``seed`` at radius ``r`` in the frame's coordinates.

    Members come from a cylinder along frame column 0 spanning ``h_range``
    (or a plain ball when ``shape="ball"``), truncated to the ``nsample`` lowest
    indices. Short groups are padded by repeating the first member; an empty
    neighbourhood yields the seed itself, i.e. ``nsample`` zero rows.
    """
    if not r > 0:
        raise PreconditionError("group radius must be positive")
    if nsample < 1:
        raise PreconditionError("nsample must be >= 1")
    seed = as_point(seed)
    frame = check_rotation(frame)
    if shape == "cylinder":
        members = cylinder_query(index, seed, frame[:, 0], r, h_range[0], h_range[1])
    elif shape == "ball":
        members = ball_query(index, seed, r)
    else:
        raise PreconditionError(f"unknown group shape {shape!r}")

    if len(members) == 0:
        idx = np.full(nsample, seed_index, dtype=np.int64)
        coords = np.zeros((nsample, 3))
    else:
        idx = members[:nsample]
        if len(idx) < nsample:
            idx = np.concatenate([idx, np.full(nsample - len(idx), idx[0], dtype=np.int64)])
        coords = local_coords(index.points[idx], seed, frame) / r
    return Group(float(r), idx, coords, members)


def group_multi(
    index: SpatialIndex,
    seed,
    frame,
    schedule: Optional[RadiiSchedule] = None,
    h_range=(-0.02, 0.04),
    nsample: int = DEFAULT_NSAMPLE,
    shape: str = "cylinder",
    seed_index: int = -1,
) -> GroupSet:
    schedule = schedule or RadiiSchedule()
    frame = check_rotation(frame)
    groups = tuple(
        group_single(index, seed, frame, r, h_range, nsample, shape, seed_index) for r in schedule.radii
    )
    return GroupSet(as_point(seed).copy(), int(seed_index), frame[:, 0].copy(), groups)
