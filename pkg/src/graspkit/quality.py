"""Analytic grasp quality and point-wise graspness.

A two-finger grasp is scored by antipodal force closure: both inward contact
normals must lie inside the friction cone around the line joining the
contacts. Quality follows the discretized convention ``q = 1.1 - mu*`` where
``mu*`` is the smallest friction coefficient on ``mu_grid`` that closes.

Graspness of a point is the fraction of its enumerated candidates (views x
in-plane angles x depths) that are collision free and score above ``c``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .collision import check_collision, reach_radius
from .core import GraspPose, GripperModel, LabeledCloud, as_unit, in_plane_pose, local_coords
from .errors import DegenerateContact, PreconditionError
from .spatial import SpatialIndex, ball_query, build_index

DEFAULT_MU_GRID = (0.2, 0.4, 0.6, 0.8, 1.0, 1.2)
DEFAULT_VIEWS = 60
DEFAULT_ANGLES = 12
CHUNK = 256

# candidate status codes, shared with the compiled scorer
OK = _kernels.OK
EMPTY = _kernels.EMPTY
WIDE = _kernels.WIDE
COLLIDE = _kernels.COLLIDE
NO_CONTACT = _kernels.NO_CONTACT


@dataclass(frozen=True)
class QualityParams:
    """Scoring parameters.

    ``denominator`` selects what graspness divides by: ``"all"`` uses every
    enumerated candidate, ``"collision_free"`` only those that fit the gripper
    without collision.
    """

    mu_grid: tuple = DEFAULT_MU_GRID
    c: float = 0.5
    clearance: float = 0.01
    min_inner: int = 1
    denominator: str = "all"

    def __post_init__(self):
        g = tuple(float(m) for m in self.mu_grid)
        object.__setattr__(self, "mu_grid", g)
        if not g or g[0] <= 0 or any(b <= a for a, b in zip(g, g[1:])):
            raise PreconditionError(f"mu_grid must be positive and ascending: {g}")
        if not 0.0 <= self.c < 1.1:
            raise PreconditionError(f"score threshold c must lie in [0, 1.1), got {self.c}")
        if not self.clearance > 0:
            raise PreconditionError("clearance must be positive")
        if self.min_inner < 0:
            raise PreconditionError("min_inner must be >= 0")
        if self.denominator not in ("all", "collision_free"):
            raise PreconditionError(f"unknown denominator mode {self.denominator!r}")


@dataclass(frozen=True, eq=False)
class ContactPair:
    """Two contacts with *inward* unit surface normals."""

    p1: np.ndarray
    p2: np.ndarray
    n1: np.ndarray
    n2: np.ndarray

    def direction(self) -> np.ndarray:
        """Unit vector from ``p1`` to ``p2``."""
        u = [float(b) - float(a) for a, b in zip(self.p1, self.p2)]
        norm = math.sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2])
        if norm == 0.0:
            raise DegenerateContact("contacts coincide")
        return np.array([u[0] / norm, u[1] / norm, u[2] / norm])


def _cone_angle(n, u) -> float:
    n0, n1, n2 = (float(x) for x in n)
    u0, u1, u2 = (float(x) for x in u)
    c0 = n1 * u2 - n2 * u1
    c1 = n2 * u0 - n0 * u2
    c2 = n0 * u1 - n1 * u0
    return math.atan2(math.sqrt(c0 * c0 + c1 * c1 + c2 * c2), n0 * u0 + n1 * u1 + n2 * u2)


def contact_angles(pair: ContactPair) -> tuple:
    """Angles between each inward normal and the line pointing at the other contact."""
    u = pair.direction()
    return _cone_angle(pair.n1, u), _cone_angle(pair.n2, -u)


def force_closure(pair: ContactPair, mu: float) -> bool:
    if not mu > 0:
        raise PreconditionError("friction coefficient must be positive")
    t1, t2 = contact_angles(pair)
    lim = math.atan(mu)
    return t1 <= lim and t2 <= lim


def min_friction(pair: ContactPair) -> float:
    """Smallest friction coefficient giving force closure (``inf`` if none)."""
    t = max(contact_angles(pair))
    if t >= math.pi / 2:
        return math.inf
    return math.tan(t)


def quality_score(pair: ContactPair, params: QualityParams = QualityParams()) -> float:
    """``1.1 - mu*`` for the smallest closing ``mu*`` on the grid, else 0.

    Scores are clamped at 0, so a grid value above 1.1 scores like no closure.
    """
    for mu in params.mu_grid:
        if force_closure(pair, mu):
            return max(1.1 - mu, 0.0)
    return 0.0


def _neighbourhood(cloud: LabeledCloud, pose: GraspPose, gripper: GripperModel, index: Optional[SpatialIndex]):
    if index is None:
        return np.arange(len(cloud))
    r = max(reach_radius(pose.with_(width=gripper.max_width), gripper), reach_radius(pose, gripper))
    return ball_query(index, pose.center, r * (1.0 + 1e-9) + 1e-12)


def find_contacts(
    cloud: LabeledCloud, pose: GraspPose, gripper: GripperModel, index: Optional[SpatialIndex] = None
) -> Optional[ContactPair]:
    """Contacts of the closing jaws on the sampled surface.

    Candidates are the points strictly between the finger inner planes and
    within the finger depth/height extent. On each side of the closing axis the
    contact is the point nearest that side's finger (lowest index on ties).
    Returns ``None`` if either side is empty.
    """
    idx = _neighbourhood(cloud, pose, gripper, index)
    q = local_coords(cloud.points[idx], pose.center, pose.rotation)
    L, h = gripper.finger_length, gripper.finger_height
    x, y, z = q[:, 0], q[:, 1], q[:, 2]
    inside = (x > pose.depth - L) & (x < pose.depth) & (np.abs(z) < h / 2.0) & (np.abs(y) < pose.width / 2.0)
    left = np.flatnonzero(inside & (y < 0.0))
    right = np.flatnonzero(inside & (y > 0.0))
    if len(left) == 0 or len(right) == 0:
        return None
    li = idx[left[np.argmin(y[left])]]
    ri = idx[right[np.argmax(y[right])]]
    return ContactPair(cloud.points[li], cloud.points[ri], -cloud.normals[li], -cloud.normals[ri])


def closing_width(
    cloud: LabeledCloud, pose: GraspPose, gripper: GripperModel, clearance: float,
    index: Optional[SpatialIndex] = None,
) -> Optional[float]:
    """Opening needed to enclose the surface between the jaws, plus clearance.

    Considers points within the finger depth/height extent and within half the
    maximum opening of the closing axis. The fingers are symmetric about the
    grasp center, so the width is twice the largest ``|y|`` plus ``clearance``.
    May exceed ``gripper.max_width``; ``None`` when no point is in range.
    """
    idx = _neighbourhood(cloud, pose, gripper, index)
    q = local_coords(cloud.points[idx], pose.center, pose.rotation)
    L, h = gripper.finger_length, gripper.finger_height
    x, y, z = q[:, 0], q[:, 1], q[:, 2]
    ay = np.abs(y)
    region = (x > pose.depth - L) & (x < pose.depth) & (np.abs(z) < h / 2.0) & (ay <= gripper.max_width / 2.0)
    if not np.any(region):
        return None
    return 2.0 * float(np.max(ay[region])) + clearance


def fit_width(
    cloud: LabeledCloud, pose: GraspPose, gripper: GripperModel, clearance: float,
    index: Optional[SpatialIndex] = None,
) -> Optional[GraspPose]:
    """``pose`` with its width set by :func:`closing_width`, or ``None`` if it cannot fit."""
    w = closing_width(cloud, pose, gripper, clearance, index)
    if w is None or w > gripper.max_width:
        return None
    return pose.with_(width=w)


def evaluate_grasp(
    cloud: LabeledCloud, index: SpatialIndex, pose: GraspPose, gripper: GripperModel, params: QualityParams
) -> float:
    """Quality of ``pose`` as given, zero if it collides or lacks a contact pair."""
    if not check_collision(index, pose, gripper, params.min_inner).admissible:
        return 0.0
    pair = find_contacts(cloud, pose, gripper, index)
    if pair is None:
        return 0.0
    return quality_score(pair, params)


def fibonacci_views(n: int) -> np.ndarray:
    """``n`` near-uniform unit vectors on the sphere (golden-angle spiral)."""
    k = np.arange(n, dtype=np.float64)
    z = 1.0 - (2.0 * k + 1.0) / n
    r = np.sqrt(1.0 - z * z)
    phi = k * math.pi * (3.0 - math.sqrt(5.0))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


@dataclass(frozen=True, eq=False)
class CandidateGrid:
    """Enumeration lattice: views x in-plane angles x depths.

    ``views`` point from the grasp point towards the viewer; candidates approach
    along ``-view``. ``world`` (3x3, optional) is the reference frame for the
    zero in-plane angle; rotating a grid with :meth:`rotated` rotates both.
    """

    views: np.ndarray
    num_angles: int
    depths: tuple
    world: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.array(self.views, dtype=np.float64).reshape(-1, 3)
        if len(v) == 0 or np.max(np.abs(np.linalg.norm(v, axis=1) - 1.0)) > 1e-9:
            raise PreconditionError("views must be non-empty unit vectors")
        if self.num_angles < 1:
            raise PreconditionError("need at least one in-plane angle")
        object.__setattr__(self, "views", v)
        object.__setattr__(self, "depths", tuple(float(d) for d in self.depths))
        if self.world is not None:
            object.__setattr__(self, "world", np.array(self.world, dtype=np.float64))

    @classmethod
    def fibonacci(cls, views: int = DEFAULT_VIEWS, angles: int = DEFAULT_ANGLES, gripper: GripperModel = GripperModel()):
        return cls(fibonacci_views(views), angles, gripper.depth_set)

    @property
    def V(self) -> int:
        return len(self.views)

    @property
    def A(self) -> int:
        return self.num_angles

    @property
    def D(self) -> int:
        return len(self.depths)

    @property
    def size(self) -> int:
        return self.V * self.A * self.D

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.A) * (math.pi / self.A)

    def rotated(self, rotation) -> "CandidateGrid":
        r = np.asarray(rotation, dtype=np.float64)
        world = r if self.world is None else r @ self.world
        return CandidateGrid(self.views @ r.T, self.num_angles, self.depths, world)

    def rotations(self) -> np.ndarray:
        """``(V, A, 3, 3)`` grasp rotations in enumeration order."""
        out = np.empty((self.V, self.A, 3, 3))
        for j, view in enumerate(self.views):
            approach = -view
            for a, ang in enumerate(self.angles):
                out[j, a] = in_plane_pose(approach, ang, self.world)
        return out

    def decode(self, col: int) -> tuple:
        """Candidate column to ``(view, angle, depth)`` indices."""
        va, d = divmod(col, self.D)
        v, a = divmod(va, self.A)
        return v, a, d


def candidate_grid(point, grid: CandidateGrid, gripper: GripperModel) -> list:
    """All ``V * A * D`` candidate poses at ``point``, view-major then angle then depth.

    Widths are nominal (``max_width``); :func:`fit_width` applies the closing rule.
    """
    rots = grid.rotations()
    out = []
    for j in range(grid.V):
        for a in range(grid.A):
            for d in grid.depths:
                out.append(GraspPose(point, rots[j, a], gripper.max_width, d))
    return out


@dataclass(frozen=True, eq=False)
class CandidateScores:
    """Per-candidate results for a batch of points, columns in grid order."""

    points: np.ndarray
    score: np.ndarray
    width: np.ndarray
    status: np.ndarray

    def graspness(self, params: QualityParams) -> np.ndarray:
        good = np.count_nonzero(self.score > params.c, axis=1)
        if params.denominator == "all":
            return good / self.score.shape[1]
        free = np.count_nonzero((self.status == OK) | (self.status == NO_CONTACT), axis=1)
        return np.divide(good, free, out=np.zeros(len(good)), where=free > 0)


def _reach(grid: CandidateGrid, gripper: GripperModel) -> float:
    t, h = gripper.finger_thickness, gripper.finger_height
    xlo = min(grid.depths) - gripper.finger_length - gripper.base_depth
    xhi = max(grid.depths)
    rad2 = (gripper.max_width / 2.0 + t) ** 2 + (h / 2.0) ** 2
    return math.sqrt(max(xlo * xlo, xhi * xhi) + rad2) * (1.0 + 1e-9) + 1e-12


def score_candidates(
    cloud: LabeledCloud,
    indices,
    grid: CandidateGrid,
    gripper: GripperModel = GripperModel(),
    params: QualityParams = QualityParams(),
    threads: int = 1,
    index: Optional[SpatialIndex] = None,
) -> CandidateScores:
    """Score every grid candidate at each of ``indices``.

    For each candidate the width is fitted to the surface between the jaws;
    candidates that cannot open wide enough, collide, or lack a contact on one
    side score 0. Work is split into fixed chunks and written positionally, so
    the output does not depend on ``threads``.
    """
    if tuple(grid.depths) != tuple(gripper.depth_set):
        raise PreconditionError("candidate grid depths must equal the gripper depth set")
    index = index or build_index(cloud)
    query = np.asarray(indices, dtype=np.int64).reshape(-1)
    nq, L = len(query), grid.size
    score = np.zeros((nq, L))
    width = np.zeros((nq, L))
    status = np.zeros((nq, L), dtype=np.int8)
    if nq == 0:
        return CandidateScores(query, score, width, status)

    rot = np.ascontiguousarray(grid.rotations())
    depths = np.asarray(grid.depths, dtype=np.float64)
    mu = np.asarray(params.mu_grid, dtype=np.float64)
    atan_mu = np.array([math.atan(m) for m in params.mu_grid])
    points = np.ascontiguousarray(cloud.points)
    normals = np.ascontiguousarray(cloud.normals)
    reach = _reach(grid, gripper)

    def run(lo):
        hi = min(lo + CHUNK, nq)
        _kernels.score_points(
            points, normals, index.order, index.keys, index.starts, index.origin, index.dims,
            index.cell_size, query[lo:hi], rot, depths, gripper.finger_length,
            gripper.finger_thickness, gripper.finger_height, gripper.base_depth,
            gripper.max_width, params.clearance, params.min_inner, atan_mu, mu, reach,
            score[lo:hi], width[lo:hi], status[lo:hi],
        )

    starts = range(0, nq, CHUNK)
    if threads <= 1:
        for lo in starts:
            run(lo)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, starts))
    return CandidateScores(query, score, width, status)


def graspness(
    cloud: LabeledCloud, i: int, grid: CandidateGrid, gripper: GripperModel = GripperModel(),
    params: QualityParams = QualityParams(), index: Optional[SpatialIndex] = None,
) -> float:
    return float(score_candidates(cloud, [i], grid, gripper, params, index=index).graspness(params)[0])


def annotate_graspness(
    cloud: LabeledCloud, grid: CandidateGrid, gripper: GripperModel = GripperModel(),
    params: QualityParams = QualityParams(), threads: int = 1, index: Optional[SpatialIndex] = None,
) -> LabeledCloud:
    index = index or build_index(cloud)
    values = np.empty(len(cloud))
    for lo in range(0, len(cloud), 4096):
        block = np.arange(lo, min(lo + 4096, len(cloud)))
        values[block] = score_candidates(cloud, block, grid, gripper, params, threads, index).graspness(params)
    return cloud.with_graspness(values)


def candidate_status(
    cloud: LabeledCloud, index: SpatialIndex, pose: GraspPose, gripper: GripperModel, params: QualityParams
) -> tuple:
    """Reference evaluation of one nominal candidate: ``(status, width, score)``.

    Composes :func:`fit_width`, :func:`check_collision`, :func:`find_contacts` and
    :func:`quality_score` one pose at a time.
    """
    w = closing_width(cloud, pose, gripper, params.clearance, index)
    if w is None:
        return EMPTY, gripper.max_width, 0.0
    if w > gripper.max_width:
        return WIDE, gripper.max_width, 0.0
    fitted = pose.with_(width=w)
    if not check_collision(index, fitted, gripper, params.min_inner).admissible:
        return COLLIDE, w, 0.0
    pair = find_contacts(cloud, fitted, gripper, index)
    if pair is None:
        return NO_CONTACT, w, 0.0
    return OK, w, quality_score(pair, params)


def graspness_reference(
    cloud: LabeledCloud, i: int, grid: CandidateGrid, gripper: GripperModel = GripperModel(),
    params: QualityParams = QualityParams(), index: Optional[SpatialIndex] = None,
) -> float:
    """Slow pose-by-pose graspness, used to cross-check the compiled scorer."""
    index = index or build_index(cloud)
    good = free = 0
    poses = candidate_grid(cloud.points[i], grid, gripper)
    for pose in poses:
        status, _, q = candidate_status(cloud, index, pose, gripper, params)
        good += q > params.c
        free += status in (OK, NO_CONTACT)
    denom = len(poses) if params.denominator == "all" else free
    return good / denom if denom else 0.0
