"""Farthest point sampling and graspable balanced sampling.

``balanced_sample`` is the inference-time sampler: every segmented object gets
an equal share of the sample budget, filled from its graspable points first.
``training_sample`` is the scene-wide variant that runs FPS over all graspable
points regardless of object membership.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LabeledCloud
from .errors import EmptyGraspable, Insufficient, NoObjects, PreconditionError

DEFAULT_GRASPNESS_THRESHOLD = 0.1


@dataclass(frozen=True)
class SamplePlan:
    """Sample budget and graspable cutoff.

    A point is graspable iff its graspness is strictly greater than
    ``graspness_threshold``. FPS always starts from the lowest index of the
    candidate subset.
    """

    M: int
    graspness_threshold: float = DEFAULT_GRASPNESS_THRESHOLD

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise PreconditionError(f"sample count must be a positive integer, got {self.M}")
        if not 0.0 <= self.graspness_threshold <= 1.0:
            raise PreconditionError("graspness_threshold must lie in [0, 1]")


def fps(cloud, subset, m: int, start: int | None = None) -> np.ndarray:
    """Greedy farthest point sampling over ``subset``.

    Parameters
    ----------
    cloud : LabeledCloud or (N, 3) array
    subset : array of point indices to sample from
    m : number of picks
    start : first pick; defaults to the lowest index in ``subset``

    Returns
    -------
    np.ndarray
        ``m`` point indices in pick order. Each pick after the first maximizes
        the squared distance to the nearest earlier pick; ties go to the lowest
        point index.
    """
    points = cloud.points if isinstance(cloud, LabeledCloud) else np.asarray(cloud, dtype=np.float64)
    subset = np.unique(np.asarray(subset, dtype=np.int64))
    if m > len(subset):
        raise Insufficient(f"cannot pick {m} points from a subset of {len(subset)}")
    if m < 1:
        raise PreconditionError("fps needs m >= 1")
    if start is None:
        start = int(subset[0])
    pos = np.searchsorted(subset, start)
    if pos >= len(subset) or subset[pos] != start:
        raise PreconditionError(f"start index {start} is not in the subset")

    pts = points[subset]
    picks = np.empty(m, dtype=np.int64)
    picks[0] = pos
    mind = np.full(len(subset), np.inf)
    last = pos
    for k in range(1, m):
        d = pts - pts[last]
        d2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
        np.minimum(mind, d2, out=mind)
        mind[picks[:k]] = -1.0
        last = int(np.argmax(mind))  # first maximum = lowest index, subset is sorted
        picks[k] = last
    return subset[picks]


def graspable_mask(cloud: LabeledCloud, threshold: float) -> np.ndarray:
    if cloud.graspness is None:
        raise PreconditionError("cloud has no graspness values; annotate it first")
    return cloud.graspness > threshold


def object_quotas(sizes: dict, M: int) -> dict:
    """Per-object sample counts summing to ``M``.

    Starts from ``M // n`` each with the remainder going one apiece to the lowest
    labels, then hands any shortfall of objects smaller than their quota out
    round-robin (ascending label) to objects that still have spare points.
    """
    labels = sorted(sizes)
    n = len(labels)
    if n == 0:
        raise NoObjects("no object points to sample from")
    if sum(sizes.values()) < M:
        raise Insufficient(f"only {sum(sizes.values())} object points for M={M}")
    base, rem = divmod(M, n)
    quota = {lab: base + (1 if i < rem else 0) for i, lab in enumerate(labels)}
    short = 0
    for lab in labels:
        if quota[lab] > sizes[lab]:
            short += quota[lab] - sizes[lab]
            quota[lab] = sizes[lab]
    while short:
        for lab in labels:
            if short and quota[lab] < sizes[lab]:
                quota[lab] += 1
                short -= 1
    return quota


def balanced_sample(cloud: LabeledCloud, plan: SamplePlan) -> np.ndarray:
    """Per-object quota sampling restricted to graspable points with fallbacks.

    For each object (ascending label) with quota ``q`` and ``n_g`` graspable points:

    * ``n_g == 0``: FPS over all of the object's points
    * ``0 < n_g < q``: every graspable point, then FPS over the object's
      non-graspable points for the remainder
    * ``n_g >= q``: FPS over the object's graspable points

    Table/background points (label -1) are never sampled.
    """
    graspable = graspable_mask(cloud, plan.graspness_threshold)
    labels = cloud.labels
    members = {int(lab): np.flatnonzero(labels == lab) for lab in cloud.object_labels}
    if not members:
        raise NoObjects("cloud has no object labels")
    quota = object_quotas({lab: len(ix) for lab, ix in members.items()}, plan.M)

    out = []
    for lab in sorted(members):
        q = quota[lab]
        if q == 0:
            continue
        ix = members[lab]
        g = ix[graspable[ix]]
        if len(g) == 0:
            out.append(fps(cloud, ix, q))
        elif len(g) < q:
            rest = ix[~graspable[ix]]
            out.append(g)
            out.append(fps(cloud, rest, q - len(g)))
        else:
            out.append(fps(cloud, g, q))
    return np.concatenate(out)


def training_sample(cloud: LabeledCloud, plan: SamplePlan) -> np.ndarray:
    """Scene-wide FPS over graspable points.

    When fewer than ``M`` points are graspable all of them are returned, in
    FPS order.
    """
    g = np.flatnonzero(graspable_mask(cloud, plan.graspness_threshold))
    if len(g) == 0:
        raise EmptyGraspable("no point exceeds the graspness threshold")
    return fps(cloud, g, min(plan.M, len(g)))
