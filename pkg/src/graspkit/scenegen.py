"""Deterministic synthetic scenes of labeled primitives with exact normals.

Surfaces are sampled at a fixed areal density. Each primitive is split into
patches (box faces, cylinder side and caps, the sphere as one patch); the
total count ``ceil(area * density)`` is shared out between patches in
proportion to area and sampled uniformly within each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import LabeledCloud, euler_xyz
from .errors import DuplicateLabel, PreconditionError

KINDS = {"box": 3, "cylinder": 2, "sphere": 1}


@dataclass(frozen=True)
class PrimitiveSpec:
    """A box ``(dx, dy, dz)``, cylinder ``(r, h)`` along local z, or sphere ``(r,)``.

    The shape is centered on ``position`` and rotated by ``rotation``
    (extrinsic xyz Euler angles, degrees).
    """

    kind: str
    dims: tuple
    position: tuple = (0.0, 0.0, 0.0)
    rotation: tuple = (0.0, 0.0, 0.0)
    label: int = 0
    density: float = 1e5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PreconditionError(f"unknown primitive kind {self.kind!r}")
        dims = tuple(float(d) for d in self.dims)
        if len(dims) != KINDS[self.kind] or any(not d > 0 for d in dims):
            raise PreconditionError(f"{self.kind} needs {KINDS[self.kind]} positive dimensions, got {dims}")
        if not self.density > 0:
            raise PreconditionError("density must be positive")
        if int(self.label) < 0:
            raise PreconditionError("object labels must be non-negative")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "position", tuple(float(p) for p in self.position))
        object.__setattr__(self, "rotation", tuple(float(a) for a in self.rotation))
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(self, "density", float(self.density))

    @property
    def matrix(self) -> np.ndarray:
        return euler_xyz(self.rotation)

    def patches(self) -> list:
        """``(area, sampler)`` pairs; a sampler maps ``(rng, n)`` to local points and normals."""
        if self.kind == "box":
            return _box_patches(*self.dims)
        if self.kind == "cylinder":
            return _cylinder_patches(*self.dims)
        return _sphere_patches(*self.dims)

    @property
    def area(self) -> float:
        return sum(a for a, _ in self.patches())


@dataclass(frozen=True)
class TableSpec:
    size: tuple = (0.4, 0.4)
    center: tuple = (0.0, 0.0)
    height: float = 0.0
    density: float = 4e4


@dataclass(frozen=True)
class SceneSpec:
    primitives: tuple = ()
    table: Optional[TableSpec] = field(default_factory=TableSpec)
    rng_seed: int = 0


def _box_patches(dx, dy, dz):
    def face(axis, sign, ext):
        def sample(rng, n):
            uv = (rng.random((n, 2)) - 0.5) * np.array(ext)
            pts = np.empty((n, 3))
            others = [k for k in range(3) if k != axis]
            pts[:, others[0]] = uv[:, 0]
            pts[:, others[1]] = uv[:, 1]
            pts[:, axis] = sign * (dx, dy, dz)[axis] / 2.0
            nrm = np.zeros((n, 3))
            nrm[:, axis] = sign
            return pts, nrm
        return sample

    size = (dx, dy, dz)
    out = []
    for axis in range(3):
        others = [size[k] for k in range(3) if k != axis]
        for sign in (1.0, -1.0):
            out.append((others[0] * others[1], face(axis, sign, others)))
    return out


def _cylinder_patches(r, h):
    def side(rng, n):
        th = rng.random(n) * 2.0 * math.pi
        zz = (rng.random(n) - 0.5) * h
        c, s = np.cos(th), np.sin(th)
        return np.column_stack([r * c, r * s, zz]), np.column_stack([c, s, np.zeros(n)])

    def cap(sign):
        def sample(rng, n):
            rr = r * np.sqrt(rng.random(n))
            th = rng.random(n) * 2.0 * math.pi
            pts = np.column_stack([rr * np.cos(th), rr * np.sin(th), np.full(n, sign * h / 2.0)])
            nrm = np.zeros((n, 3))
            nrm[:, 2] = sign
            return pts, nrm
        return sample

    disk = math.pi * r * r
    return [(2.0 * math.pi * r * h, side), (disk, cap(1.0)), (disk, cap(-1.0))]


def _sphere_patches(r):
    def sample(rng, n):
        v = rng.standard_normal((n, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return r * v, v
    return [(4.0 * math.pi * r * r, sample)]


def _split(total: int, areas) -> list:
    """Largest-remainder apportionment of ``total`` samples by area."""
    areas = np.asarray(areas, dtype=np.float64)
    share = total * areas / areas.sum()
    counts = np.floor(share).astype(int)
    rest = total - counts.sum()
    order = np.argsort(-(share - counts), kind="stable")
    counts[order[:rest]] += 1
    return counts.tolist()


def sample_surface(spec: PrimitiveSpec, seed: int = 0):
    """World-frame surface samples of one primitive.

    Returns ``(points, normals, labels)`` with ``ceil(area * density)`` rows and
    exact outward unit normals.
    """
    rng = np.random.default_rng([int(seed), spec.label])
    patches = spec.patches()
    total = int(math.ceil(sum(a for a, _ in patches) * spec.density))
    pts, nrm = [], []
    for count, (_, sampler) in zip(_split(total, [a for a, _ in patches]), patches):
        if count:
            p, n = sampler(rng, count)
            pts.append(p)
            nrm.append(n)
    R = spec.matrix
    P = np.concatenate(pts) @ R.T + np.asarray(spec.position)
    N = np.concatenate(nrm) @ R.T
    return P, N, np.full(len(P), spec.label, dtype=np.int64)


def sample_table(table: TableSpec, seed: int = 0):
    sx, sy = table.size
    n = int(math.ceil(sx * sy * table.density))
    rng = np.random.default_rng([int(seed), 2**31 - 1])
    uv = (rng.random((n, 2)) - 0.5) * np.array([sx, sy]) + np.asarray(table.center)
    pts = np.column_stack([uv, np.full(n, float(table.height))])
    nrm = np.tile([0.0, 0.0, 1.0], (n, 1))
    return pts, nrm, np.full(n, -1, dtype=np.int64)


def build_scene(spec: SceneSpec) -> LabeledCloud:
    """Union of all primitive samples (ascending label) followed by the table."""
    labels = [p.label for p in spec.primitives]
    if len(set(labels)) != len(labels):
        raise DuplicateLabel(f"primitive labels must be unique, got {labels}")
    parts = [sample_surface(p, spec.rng_seed) for p in sorted(spec.primitives, key=lambda p: p.label)]
    if spec.table is not None:
        parts.append(sample_table(spec.table, spec.rng_seed))
    if not parts:
        return LabeledCloud(np.empty((0, 3)), np.empty((0, 3)), np.empty(0, dtype=np.int64))
    return LabeledCloud(*(np.concatenate(c) for c in zip(*parts)))


def perturb_labels(cloud: LabeledCloud, flip_fraction: float, seed: int = 0) -> LabeledCloud:
    """Reassign ``floor(flip_fraction * n_object_points)`` object points to another object.

    Emulates an imperfect segmentation. Each chosen point gets a label drawn
    uniformly from the other object labels; table points are untouched.
    """
    if not 0.0 <= flip_fraction <= 1.0:
        raise PreconditionError("flip_fraction must lie in [0, 1]")
    obj = np.flatnonzero(cloud.labels >= 0)
    k = int(math.floor(flip_fraction * len(obj)))
    if k == 0:
        return cloud
    names = cloud.object_labels
    if len(names) < 2:
        raise PreconditionError("relabelling needs at least two objects")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(obj, size=k, replace=False))
    labels = cloud.labels.copy()
    for i in chosen:
        others = names[names != labels[i]]
        labels[i] = others[rng.integers(len(others))]
    return cloud.with_labels(labels)


def clutter_scene(seed: int = 0, density: float = 1e5, table_density: float = 4.5e4) -> SceneSpec:
    """Six primitives of mixed scale on a 0.45 m table, roughly 17k points."""
    prims = (
        PrimitiveSpec("box", (0.05, 0.04, 0.06), (-0.08, -0.07, 0.03), (0, 0, 20), 0, density),
        PrimitiveSpec("box", (0.12, 0.03, 0.04), (0.06, -0.08, 0.02), (0, 0, -15), 1, density),
        PrimitiveSpec("cylinder", (0.025, 0.09), (0.08, 0.06, 0.045), (0, 0, 0), 2, density),
        PrimitiveSpec("cylinder", (0.015, 0.12), (-0.06, 0.07, 0.015), (0, 90, 30), 3, density),
        PrimitiveSpec("sphere", (0.03,), (0.0, 0.0, 0.03), (0, 0, 0), 4, density),
        PrimitiveSpec("sphere", (0.02,), (-0.1, 0.0, 0.02), (0, 0, 0), 5, density),
    )
    return SceneSpec(prims, TableSpec((0.45, 0.45), (0.0, 0.0), 0.0, table_density), seed)


def small_object_scene(seed: int = 0, density: float = 1e5, table_density: float = 4.5e4) -> SceneSpec:
    """One small sphere (r = 0.015 m) among five larger primitives."""
    prims = (
        PrimitiveSpec("box", (0.08, 0.06, 0.07), (-0.08, -0.07, 0.035), (0, 0, 10), 0, density),
        PrimitiveSpec("box", (0.1, 0.08, 0.05), (0.07, -0.07, 0.025), (0, 0, -20), 1, density),
        PrimitiveSpec("cylinder", (0.035, 0.1), (0.08, 0.07, 0.05), (0, 0, 0), 2, density),
        PrimitiveSpec("cylinder", (0.03, 0.12), (-0.07, 0.07, 0.03), (0, 90, 0), 3, density),
        PrimitiveSpec("sphere", (0.015,), (0.0, 0.0, 0.015), (0, 0, 0), 4, density),
        PrimitiveSpec("sphere", (0.045,), (0.0, 0.1, 0.045), (0, 0, 0), 5, density),
    )
    return SceneSpec(prims, TableSpec((0.45, 0.45), (0.0, 0.0), 0.0, table_density), seed)
