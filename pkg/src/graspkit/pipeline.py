"""Analytic detection pipeline.

annotate -> sample -> enumerate and score candidates at the sampled points ->
best candidate per (point, view) -> drop zero scores -> approach filter -> NMS
-> top-K, with multi-radii groups recorded for the surviving grasps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import GraspPose, GripperModel, LabeledCloud
from .errors import EmptyGraspable, PreconditionError
from .evaluation import GraspList, approach_filter, nms
from .grouping import DEFAULT_NSAMPLE, DEFAULT_RADII, RadiiSchedule, default_h_range, group_multi
from .quality import DEFAULT_ANGLES, DEFAULT_VIEWS, CandidateGrid, QualityParams, annotate_graspness, score_candidates
from .sampling import DEFAULT_GRASPNESS_THRESHOLD, SamplePlan, balanced_sample, training_sample
from .spatial import SpatialIndex, build_index


@dataclass(frozen=True)
class PipelineConfig:
    sampling: str = "gbs"
    num_samples: int = 256
    views: int = DEFAULT_VIEWS
    angles: int = DEFAULT_ANGLES
    radii: tuple = DEFAULT_RADII
    nsample: int = DEFAULT_NSAMPLE
    group_shape: str = "cylinder"
    quality: QualityParams = QualityParams()
    graspness_threshold: float = DEFAULT_GRASPNESS_THRESHOLD
    nms_trans: float = 0.03
    nms_rot: float = 30.0  # degrees
    max_approach_angle: float = 180.0  # degrees; 180 keeps every approach
    top_k: int = 50
    seed: int = 0
    threads: int = 1
    gripper: GripperModel = GripperModel()

    def validate(self) -> "PipelineConfig":
        """Check every field against its module's preconditions before any work starts."""
        if self.sampling not in ("gbs", "fps"):
            raise PreconditionError(f"sampling must be gbs or fps, got {self.sampling!r}")
        SamplePlan(self.num_samples, self.graspness_threshold)
        if self.views < 1 or self.angles < 1:
            raise PreconditionError("views and angles must be >= 1")
        RadiiSchedule(self.radii).validate(self.gripper)
        if self.nsample < 1:
            raise PreconditionError("nsample must be >= 1")
        if self.group_shape not in ("cylinder", "ball"):
            raise PreconditionError(f"unknown group shape {self.group_shape!r}")
        if not (self.nms_trans > 0 and self.nms_rot > 0):
            raise PreconditionError("NMS thresholds must be positive")
        if not 0.0 < self.max_approach_angle <= 180.0:
            raise PreconditionError("max approach angle must lie in (0, 180] degrees")
        if self.top_k < 1:
            raise PreconditionError("top-k must be >= 1")
        if self.threads < 1:
            raise PreconditionError("threads must be >= 1")
        return self

    def grid(self) -> CandidateGrid:
        return CandidateGrid.fibonacci(self.views, self.angles, self.gripper)

    def as_meta(self) -> dict:
        """Effective configuration for file headers.

        The thread count is left out: outputs do not depend on it and files
        written with different counts must stay byte identical.
        """
        q = self.quality
        return {
            "config.sampling": self.sampling,
            "config.num_samples": self.num_samples,
            "config.views": self.views,
            "config.angles": self.angles,
            "config.radii": tuple(self.radii),
            "config.nsample": self.nsample,
            "config.group_shape": self.group_shape,
            "config.mu_grid": tuple(q.mu_grid),
            "config.score_threshold": float(q.c),
            "config.clearance": float(q.clearance),
            "config.min_inner_points": q.min_inner,
            "config.denominator": q.denominator,
            "config.graspness_threshold": float(self.graspness_threshold),
            "config.nms_trans": float(self.nms_trans),
            "config.nms_rot": float(self.nms_rot),
            "config.max_approach_angle": float(self.max_approach_angle),
            "config.top_k": self.top_k,
            "config.seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class Detection:
    grasps: GraspList  # tags are (point index, candidate column)
    sampled: np.ndarray
    groups: tuple  # (rank, GroupSet) per output grasp
    warnings: tuple = ()
    stats: dict = field(default_factory=dict)


def annotate(cloud: LabeledCloud, config: PipelineConfig, index: Optional[SpatialIndex] = None) -> LabeledCloud:
    return annotate_graspness(cloud, config.grid(), config.gripper, config.quality, config.threads, index)


def best_per_view(scores, widths, V: int, per_view: int) -> tuple:
    """Column of the best candidate per (point, view), lowest column on ties.

    Returns ``(cols, best)`` shaped ``(n, V)``.
    """
    s = scores.reshape(len(scores), V, per_view)
    k = np.argmax(s, axis=2)  # first maximum
    best = np.take_along_axis(s, k[..., None], axis=2)[..., 0]
    cols = np.arange(V)[None, :] * per_view + k
    return cols, best


def detect(cloud: LabeledCloud, config: PipelineConfig, index: Optional[SpatialIndex] = None) -> Detection:
    """Run the pipeline on a cloud that already carries graspness (see :func:`annotate`)."""
    config.validate()
    if cloud.graspness is None:
        raise PreconditionError("cloud has no graspness values; annotate it first")
    index = index or build_index(cloud)
    gripper = config.gripper
    plan = SamplePlan(config.num_samples, config.graspness_threshold)
    warnings = []
    if config.sampling == "gbs":
        sampled = balanced_sample(cloud, plan)
    else:
        try:
            sampled = training_sample(cloud, plan)
        except EmptyGraspable as e:
            warnings.append(f"{e}; writing an empty grasp list")
            return Detection(GraspList((), ()), np.empty(0, dtype=np.int64), (), tuple(warnings),
                             {"sampled": 0, "candidates": 0, "nonzero": 0, "after_filter": 0, "output": 0})
        if len(sampled) < config.num_samples:
            warnings.append(f"only {len(sampled)} graspable points for M={config.num_samples}")

    grid = config.grid()
    res = score_candidates(cloud, sampled, grid, gripper, config.quality, config.threads, index)
    per_view = grid.A * grid.D
    cols, best = best_per_view(res.score, res.width, grid.V, per_view)
    rows, views = np.nonzero(best > 0.0)
    pts = sampled[rows]
    cc = cols[rows, views]
    sc = best[rows, views]
    # canonical order: score descending, then point index, then candidate column
    order = np.lexsort((cc, pts, -sc))
    rots = grid.rotations()
    poses, tags = [], []
    for o in order:
        r, c, p = rows[o], int(cc[o]), int(pts[o])
        v, a, d = grid.decode(c)
        poses.append(GraspPose(cloud.points[p], rots[v, a], res.width[r, c], grid.depths[d], sc[o]))
        tags.append((p, c))
    grasps = GraspList(tuple(poses), tuple(tags))
    n_nonzero = len(grasps)
    if config.max_approach_angle < 180.0:
        grasps = approach_filter(grasps, math.radians(config.max_approach_angle))
    n_filtered = len(grasps)
    grasps = nms(grasps, config.nms_trans, math.radians(config.nms_rot), limit=config.top_k)

    schedule = RadiiSchedule(config.radii)
    h_range = default_h_range(gripper)
    groups = tuple(
        (rank, group_multi(index, g.center, g.rotation, schedule, h_range, config.nsample, config.group_shape, tag[0]))
        for rank, (g, tag) in enumerate(zip(grasps, grasps.tags))
    )
    stats = {"sampled": len(sampled), "candidates": int(res.score.size), "nonzero": n_nonzero,
             "after_filter": n_filtered, "output": len(grasps)}
    return Detection(grasps, sampled, groups, tuple(warnings), stats)
