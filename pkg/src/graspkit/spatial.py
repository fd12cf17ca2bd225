"""Uniform-grid spatial index with exact ball and cylinder queries.

The grid only prunes candidates; membership is always decided by the exact
predicate, so results never depend on ``cell_size``.
"""

from __future__ import annotations

import math

import numpy as np

from .core import LabeledCloud, as_point, as_unit
from .errors import EmptyCloud, PreconditionError

DEFAULT_CELL_SIZE = 0.05


class SpatialIndex:
    """Immutable grid over the points of a :class:`LabeledCloud`.

    Cells are keyed by integer coordinates ``floor((p - origin) / cell_size)``,
    linearized as ``ix + nx * (iy + ny * iz)``. ``order`` lists point indices
    grouped by cell (ascending key, then ascending point index) and
    ``starts[k]:starts[k + 1]`` slices the points of occupied cell ``keys[k]``.
    """

    def __init__(self, cloud: LabeledCloud, cell_size: float = DEFAULT_CELL_SIZE):
        if not (cell_size > 0 and math.isfinite(cell_size)):
            raise PreconditionError(f"cell_size must be positive, got {cell_size}")
        if len(cloud) == 0:
            raise EmptyCloud("cannot index an empty cloud")
        self.cloud = cloud
        self.points = cloud.points
        self.cell_size = float(cell_size)
        self.origin = self.points.min(axis=0)
        ijk = np.floor((self.points - self.origin) / self.cell_size).astype(np.int64)
        self.dims = ijk.max(axis=0) + 1
        if float(np.prod(self.dims.astype(np.float64))) > 2.0**62:
            raise PreconditionError("cell_size too small for the cloud extent")
        lin = self._linear(ijk)
        self.order = np.lexsort((np.arange(len(lin)), lin)).astype(np.int64)
        sorted_keys = lin[self.order]
        self.keys, first = np.unique(sorted_keys, return_index=True)
        self.starts = np.append(first, len(sorted_keys)).astype(np.int64)
        for a in (self.origin, self.dims, self.order, self.keys, self.starts):
            a.flags.writeable = False

    def _linear(self, ijk):
        nx, ny, _ = self.dims
        return ijk[..., 0] + nx * (ijk[..., 1] + ny * ijk[..., 2])

    def __len__(self):
        return len(self.points)

    @property
    def n_cells(self) -> int:
        return len(self.keys)

    def cell_populations(self) -> np.ndarray:
        return np.diff(self.starts)

    def candidates_in_box(self, lo, hi) -> np.ndarray:
        """Indices of all points in cells overlapping the axis-aligned box [lo, hi]."""
        ilo = np.floor((np.asarray(lo) - self.origin) / self.cell_size).astype(np.int64)
        ihi = np.floor((np.asarray(hi) - self.origin) / self.cell_size).astype(np.int64)
        ilo = np.maximum(ilo, 0)
        ihi = np.minimum(ihi, self.dims - 1)
        if np.any(ihi < ilo):
            return np.empty(0, dtype=np.int64)
        grids = np.meshgrid(*(np.arange(a, b + 1) for a, b in zip(ilo, ihi)), indexing="ij")
        want = self._linear(np.stack([g.ravel() for g in grids], axis=1))
        pos = np.searchsorted(self.keys, want)
        ok = pos < len(self.keys)
        pos, want = pos[ok], want[ok]
        hit = pos[self.keys[pos] == want]
        if len(hit) == 0:
            return np.empty(0, dtype=np.int64)
        chunks = [self.order[self.starts[k]:self.starts[k + 1]] for k in hit]
        return np.concatenate(chunks)


def build_index(cloud: LabeledCloud, cell_size: float = DEFAULT_CELL_SIZE) -> SpatialIndex:
    return SpatialIndex(cloud, cell_size)


def ball_mask(points, center, r) -> np.ndarray:
    d = points - center
    return np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]) <= r


def cylinder_mask(points, center, axis, r, h_lo, h_hi) -> np.ndarray:
    d = points - center
    a = d[:, 0] * axis[0] + d[:, 1] * axis[1] + d[:, 2] * axis[2]
    rad = d - a[:, None] * axis
    dist = np.sqrt(rad[:, 0] * rad[:, 0] + rad[:, 1] * rad[:, 1] + rad[:, 2] * rad[:, 2])
    return (a >= h_lo) & (a <= h_hi) & (dist <= r)


def _slack(c, r):
    # cell pruning must never drop a point the exact predicate accepts after rounding
    return 1e-9 * (1.0 + float(np.max(np.abs(c))) + r)


def ball_query(index: SpatialIndex, center, r: float) -> np.ndarray:
    """Ascending indices with ``||p - center|| <= r`` (boundary inclusive)."""
    if not r > 0:
        raise PreconditionError(f"ball radius must be positive, got {r}")
    c = as_point(center)
    pad = r + _slack(c, r)
    cand = index.candidates_in_box(c - pad, c + pad)
    keep = cand[ball_mask(index.points[cand], c, r)]
    return np.sort(keep)


def cylinder_query(index: SpatialIndex, center, axis, r: float, h_lo: float, h_hi: float) -> np.ndarray:
    """Ascending indices inside the finite cylinder along ``axis``.

    With ``d = p - center`` and ``a = d . axis``, a point is a member iff
    ``h_lo <= a <= h_hi`` and ``||d - a * axis|| <= r``.
    """
    if not r > 0:
        raise PreconditionError(f"cylinder radius must be positive, got {r}")
    if not h_lo < h_hi:
        raise PreconditionError("cylinder needs h_lo < h_hi")
    c = as_point(center)
    ax = as_unit(axis)
    ends = np.stack([c + h_lo * ax, c + h_hi * ax])
    # per-axis half extent of a disk of radius r normal to ax
    spread = r * np.sqrt(np.clip(1.0 - ax * ax, 0.0, 1.0)) + _slack(c, r + abs(h_lo) + abs(h_hi))
    cand = index.candidates_in_box(ends.min(axis=0) - spread, ends.max(axis=0) + spread)
    keep = cand[cylinder_mask(index.points[cand], c, ax, r, h_lo, h_hi)]
    return np.sort(keep)
