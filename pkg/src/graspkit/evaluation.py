"""Grasp-list metrics: precision@k, AP per friction coefficient, scale bins.

A grasp is *true* at friction ``mu`` when it is admissible (collision free with
at least ``min_inner`` points between the jaws) and the contacts it closes on
achieve antipodal force closure at ``mu``. Truth is evaluated on the pose as
given, including its width.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .collision import check_collision
from .core import GraspPose, GripperModel, LabeledCloud, geodesic_angle
from .errors import PreconditionError
from .quality import DEFAULT_MU_GRID, QualityParams, contact_angles, find_contacts
from .spatial import SpatialIndex, build_index

DEFAULT_K = 50
NMS_TRANS = 0.03
NMS_ROT = math.radians(30.0)
# [lo, hi) except the last bin, which is closed at the gripper limit
SCALE_BINS = (("S", 0.0, 0.04), ("M", 0.04, 0.07), ("L", 0.07, 0.10))
ANGLE_TOL = 1e-12
DOWN = np.array([0.0, 0.0, -1.0])


@dataclass(frozen=True, eq=False)
class GraspList:
    """Grasps in non-increasing score order.

    ``tags`` optionally carries one provenance tuple per grasp (for example the
    source point index and candidate column) and travels with its grasp through
    filtering.
    """

    grasps: tuple = ()
    tags: Optional[tuple] = None

    def __post_init__(self):
        g = tuple(self.grasps)
        object.__setattr__(self, "grasps", g)
        if self.tags is not None:
            t = tuple(self.tags)
            if len(t) != len(g):
                raise PreconditionError("tags differ in length from grasps")
            object.__setattr__(self, "tags", t)
        s = [p.score for p in g]
        if any(b > a for a, b in zip(s, s[1:])):
            raise PreconditionError("grasp list scores must be non-increasing")

    @classmethod
    def ranked(cls, grasps: Sequence[GraspPose], tags=None) -> "GraspList":
        """Stable sort by descending score (ties keep their input order)."""
        order = sorted(range(len(grasps)), key=lambda i: -grasps[i].score)
        return cls(
            tuple(grasps[i] for i in order),
            None if tags is None else tuple(tags[i] for i in order),
        )

    def __len__(self):
        return len(self.grasps)

    def __iter__(self):
        return iter(self.grasps)

    def __getitem__(self, i):
        return self.grasps[i]

    def take(self, keep) -> "GraspList":
        keep = list(keep)
        tags = None if self.tags is None else tuple(self.tags[i] for i in keep)
        return GraspList(tuple(self.grasps[i] for i in keep), tags)

    def head(self, k: int) -> "GraspList":
        return self.take(range(min(k, len(self))))

    @property
    def scores(self) -> np.ndarray:
        return np.array([g.score for g in self.grasps], dtype=np.float64)

    @property
    def widths(self) -> np.ndarray:
        return np.array([g.width for g in self.grasps], dtype=np.float64)


def nms(grasps: GraspList, t_thresh: float = NMS_TRANS, r_thresh: float = NMS_ROT,
        limit: Optional[int] = None) -> GraspList:
    """Greedy non-maximum suppression in score order.

    A grasp is dropped when some already *kept* grasp lies closer than
    ``t_thresh`` (center distance) and ``r_thresh`` (geodesic rotation angle,
    radians). With ``limit`` the scan stops once that many grasps are kept,
    which equals truncating the full result.
    """
    if not (t_thresh > 0 and r_thresh > 0):
        raise PreconditionError("nms thresholds must be positive")
    n = len(grasps)
    limit = n if limit is None else limit
    centers = np.empty((n, 3))
    rots = np.empty((n, 9))
    kept = []
    # angle < r  <=>  (trace - 1) / 2 > cos(r)
    cos_r = math.cos(r_thresh)
    t2 = t_thresh * t_thresh
    for i, g in enumerate(grasps):
        if len(kept) >= limit:
            break
        m = len(kept)
        if m:
            d = centers[:m] - g.center
            near = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2] < t2
            if np.any(near):
                tr = rots[:m][near] @ g.rotation.reshape(-1)
                if np.any(np.minimum(1.0, (tr - 1.0) / 2.0) > cos_r):
                    continue
        centers[m] = g.center
        rots[m] = g.rotation.reshape(-1)
        kept.append(i)
    return grasps.take(kept)


def approach_angle(pose: GraspPose) -> float:
    """Angle between the approach axis and world -Z (straight down), radians."""
    c = float(np.dot(pose.approach, DOWN))
    return math.acos(min(1.0, max(-1.0, c)))


def approach_filter(grasps: GraspList, max_angle: float) -> GraspList:
    """Keep grasps whose approach is within ``max_angle`` of straight down (inclusive)."""
    if not 0.0 < max_angle <= math.pi:
        raise PreconditionError("max_angle must lie in (0, pi]")
    return grasps.take(i for i, g in enumerate(grasps) if approach_angle(g) <= max_angle + ANGLE_TOL)


def scale_bin(width: float) -> str:
    for name, lo, hi in SCALE_BINS:
        if lo <= width < hi:
            return name
    if width == SCALE_BINS[-1][2]:
        return SCALE_BINS[-1][0]
    raise PreconditionError(f"width {width} outside the scale bins")


class GraspEvaluator:
    """Caches per-grasp truth against one scene.

    Each grasp is reduced once to its worst contact-cone angle (``inf`` when it
    is inadmissible or lacks a contact pair); truth at ``mu`` is then
    ``angle <= atan(mu)``, the same comparison :func:`quality.force_closure` makes.
    """

    def __init__(self, scene: LabeledCloud, gripper: GripperModel = GripperModel(), min_inner: int = 1,
                 index: Optional[SpatialIndex] = None, threads: int = 1):
        self.scene = scene
        self.gripper = gripper
        self.min_inner = min_inner
        self.index = index if index is not None else build_index(scene)
        self.threads = threads
        self._cache = {}

    def _angle(self, pose: GraspPose) -> float:
        if not check_collision(self.index, pose, self.gripper, self.min_inner).admissible:
            return math.inf
        pair = find_contacts(self.scene, pose, self.gripper, self.index)
        if pair is None:
            return math.inf
        return max(contact_angles(pair))

    def angles(self, grasps: GraspList) -> np.ndarray:
        todo = [g for g in grasps if id(g) not in self._cache]
        if self.threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                vals = list(pool.map(self._angle, todo))
        else:
            vals = [self._angle(g) for g in todo]
        for g, v in zip(todo, vals):
            # keep the pose alive so its id stays unique
            self._cache[id(g)] = (g, v)
        return np.array([self._cache[id(g)][1] for g in grasps], dtype=np.float64)

    def truth(self, grasps: GraspList, mu: float) -> np.ndarray:
        if not mu > 0:
            raise PreconditionError("friction coefficient must be positive")
        return self.angles(grasps) <= math.atan(mu)

    def precision_at_k(self, grasps: GraspList, mu: float, k: int) -> float:
        if k < 1:
            raise PreconditionError("k must be >= 1")
        top = grasps.head(k)
        return float(np.count_nonzero(self.truth(top, mu))) / k

    def ap_mu(self, grasps: GraspList, mu: float, K: int = DEFAULT_K) -> float:
        return float(np.mean(self.precision_curve(grasps, mu, K)))

    def precision_curve(self, grasps: GraspList, mu: float, K: int = DEFAULT_K) -> np.ndarray:
        """precision@k for k = 1..K; slots beyond the list count as false."""
        if K < 1:
            raise PreconditionError("K must be >= 1")
        hits = np.zeros(K)
        t = self.truth(grasps.head(K), mu)
        hits[: len(t)] = t
        return np.cumsum(hits) / np.arange(1, K + 1)


def precision_at_k(grasps: GraspList, scene: LabeledCloud, mu: float, gripper: GripperModel = GripperModel(),
                   k: int = DEFAULT_K, min_inner: int = 1) -> float:
    return GraspEvaluator(scene, gripper, min_inner).precision_at_k(grasps, mu, k)


def ap_mu(grasps: GraspList, scene: LabeledCloud, mu: float, gripper: GripperModel = GripperModel(),
          K: int = DEFAULT_K, min_inner: int = 1) -> float:
    return GraspEvaluator(scene, gripper, min_inner).ap_mu(grasps, mu, K)


@dataclass(frozen=True, eq=False)
class ScaleAP:
    """AP per width bin; unpacks as ``(ap_s, ap_m, ap_l, mean)``."""

    ap_s: float
    ap_m: float
    ap_l: float
    mean: float
    empty: tuple = (False, False, False)
    counts: tuple = (0, 0, 0)

    def __iter__(self):
        return iter((self.ap_s, self.ap_m, self.ap_l, self.mean))


@dataclass(frozen=True, eq=False)
class EvalReport:
    mu_grid: tuple
    K: int
    n_grasps: int
    precision: dict  # mu -> (K,) precision@k curve
    ap_mu: dict  # mu -> AP at that mu
    ap: float
    scale: Optional[ScaleAP] = None
    meta: dict = field(default_factory=dict)

    def ap_at(self, mu: float) -> Optional[float]:
        for m, v in self.ap_mu.items():
            if abs(m - mu) < 1e-12:
                return v
        return None

    def as_kv(self) -> dict:
        """Flat, machine-readable view; floats in shortest round-trip form."""
        out = {"n_grasps": str(self.n_grasps), "K": str(self.K)}
        out.update({k: str(v) for k, v in self.meta.items()})
        out["mu_grid"] = ",".join(repr(float(m)) for m in self.mu_grid)
        out["AP"] = repr(float(self.ap))
        for m in self.mu_grid:
            out[f"AP_{m:g}"] = repr(float(self.ap_mu[m]))
        for m in self.mu_grid:
            out[f"precision_{m:g}"] = ",".join(repr(float(p)) for p in self.precision[m])
        if self.scale is not None:
            for name, v, e, n in zip("SML", (self.scale.ap_s, self.scale.ap_m, self.scale.ap_l),
                                     self.scale.empty, self.scale.counts):
                out[f"AP_{name}"] = repr(float(v))
                out[f"AP_{name}_empty"] = str(int(e))
                out[f"AP_{name}_count"] = str(n)
            out["AP_scale_mean"] = repr(float(self.scale.mean))
        return out

    def to_text(self) -> str:
        lines = [f"grasps evaluated: {self.n_grasps}   K = {self.K}", ""]
        lines.append(f"{'mu':>6}  {'AP_mu':>8}  {'P@1':>6}  {'P@10':>6}  {'P@K':>6}")
        for m in self.mu_grid:
            p = self.precision[m]
            p10 = p[min(9, len(p) - 1)]
            lines.append(f"{m:>6.2f}  {100 * self.ap_mu[m]:>8.2f}  {p[0]:>6.3f}  {p10:>6.3f}  {p[-1]:>6.3f}")
        lines.append("")
        lines.append(f"AP   {100 * self.ap:.2f}")
        for m in (0.8, 0.4):
            v = self.ap_at(m)
            if v is not None:
                lines.append(f"AP_{m:g} {100 * v:.2f}")
        if self.scale is not None:
            lines.append("")
            lines.append(f"{'bin':<4} {'width':<12} {'grasps':>6}  {'AP':>7}")
            for (name, lo, hi), v, e, n in zip(SCALE_BINS, (self.scale.ap_s, self.scale.ap_m, self.scale.ap_l),
                                                self.scale.empty, self.scale.counts):
                rng = f"[{lo:.2f}, {hi:.2f}{']' if name == 'L' else ')'}"
                lines.append(f"{name:<4} {rng:<12} {n:>6}  {100 * v:>7.2f}{'  (empty)' if e else ''}")
            lines.append(f"mean {'':<12} {'':>6}  {100 * self.scale.mean:>7.2f}")
        return "\n".join(lines) + "\n"


def _overall(ev: GraspEvaluator, grasps: GraspList, mu_grid, K: int) -> tuple:
    curves = {float(m): ev.precision_curve(grasps, m, K) for m in mu_grid}
    aps = {m: float(np.mean(c)) for m, c in curves.items()}
    return curves, aps, float(np.mean(list(aps.values())))


def scale_stratified_ap(grasps: GraspList, scene: LabeledCloud, gripper: GripperModel = GripperModel(),
                        params: QualityParams = QualityParams(), K: int = DEFAULT_K,
                        evaluator: Optional[GraspEvaluator] = None) -> ScaleAP:
    """Overall AP within each width bin; an empty bin scores 0 and is flagged."""
    ev = evaluator or GraspEvaluator(scene, gripper, params.min_inner)
    names = [scale_bin(w) for w in grasps.widths]
    vals, empty, counts = [], [], []
    for name, _, _ in SCALE_BINS:
        sub = grasps.take(i for i, b in enumerate(names) if b == name)
        counts.append(len(sub))
        empty.append(len(sub) == 0)
        vals.append(0.0 if len(sub) == 0 else _overall(ev, sub, params.mu_grid, K)[2])
    return ScaleAP(vals[0], vals[1], vals[2], float(np.mean(vals)), tuple(empty), tuple(counts))


def ap_overall(grasps: GraspList, scene: LabeledCloud, gripper: GripperModel = GripperModel(),
               params: QualityParams = QualityParams(), K: int = DEFAULT_K, with_scale: bool = True,
               threads: int = 1, evaluator: Optional[GraspEvaluator] = None) -> EvalReport:
    """AP over the friction grid, i.e. the mean of :meth:`GraspEvaluator.ap_mu`."""
    if not params.mu_grid:
        raise PreconditionError("mu_grid must not be empty")
    ev = evaluator or GraspEvaluator(scene, gripper, params.min_inner, threads=threads)
    curves, aps, ap = _overall(ev, grasps, params.mu_grid, K)
    scale = scale_stratified_ap(grasps, scene, gripper, params, K, ev) if with_scale else None
    return EvalReport(tuple(float(m) for m in params.mu_grid), K, len(grasps), curves, aps, ap, scale)


__all__ = [
    "DEFAULT_K", "DEFAULT_MU_GRID", "SCALE_BINS", "GraspList", "GraspEvaluator", "EvalReport", "ScaleAP",
    "nms", "approach_angle", "approach_filter", "scale_bin", "precision_at_k", "ap_mu", "ap_overall",
    "scale_stratified_ap",
]
