"""Plain-text file formats: clouds, grasp lists, group sidecars, scene specs, grippers.

Every data file starts with a ``#graspkit-<kind> v1`` header line followed by
``# key=value`` metadata lines. Floats are written with 17 significant digits,
so a read-write round trip is bit exact.

Scene-spec files are line oriented::

    # comment
    seed = 0
    table.size = 0.45, 0.45      # or: table = none
    table.center = 0, 0
    table.height = 0
    table.density = 45000

    [primitive]
    kind = box                   # box | cylinder | sphere
    dims = 0.05, 0.04, 0.06      # box dx,dy,dz; cylinder r,h; sphere r
    position = -0.08, -0.07, 0.03
    rotation = 0, 0, 20          # extrinsic xyz Euler angles, degrees
    label = 0
    density = 100000             # points per square meter
"""

from __future__ import annotations

import hashlib
import math
import os
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .core import GraspPose, GripperModel, LabeledCloud
from .errors import ParseError, PreconditionError
from .evaluation import GraspList
from .scenegen import PrimitiveSpec, SceneSpec, TableSpec

CLOUD_MAGIC = "#graspkit-cloud"
GRASPS_MAGIC = "#graspkit-grasps"
GROUPS_MAGIC = "#graspkit-groups"
CLOUD_FIELDS = ("x", "y", "z", "nx", "ny", "nz", "label")
GRASP_FIELDS = 15  # score, center (3), rotation row-major (9), width, depth


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_value(v) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _meta_lines(meta: dict) -> list:
    out = []
    for k, v in meta.items():
        s = _fmt_value(v)
        if "\n" in s or "=" in k:
            raise PreconditionError(f"metadata entry {k!r} is not representable")
        out.append(f"# {k}={s}\n")
    return out


def gripper_meta(gripper: GripperModel) -> dict:
    return {f"gripper.{k}": v for k, v in gripper.as_dict().items()}


def gripper_from_meta(meta: dict, path=None) -> Optional[GripperModel]:
    keys = {k[len("gripper."):]: v for k, v in meta.items() if k.startswith("gripper.")}
    if not keys:
        return None
    return gripper_from_pairs(keys, path)


def _split_line(line: str) -> list:
    """Whitespace tokens with their 1-based start columns."""
    out, col, n = [], 0, len(line)
    while col < n:
        while col < n and line[col].isspace():
            col += 1
        start = col
        while col < n and not line[col].isspace():
            col += 1
        if col > start:
            out.append((line[start:col], start + 1))
    return out


def _float(tok: str, path, line: int, col: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"expected a number, got {tok!r}", path, line, col) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {tok!r}", path, line, col)
    return v


def _int(tok: str, path, line: int, col: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected an integer, got {tok!r}", path, line, col) from None


def _read_header(lines: list, magic: str, path) -> tuple:
    """Parse ``<magic> v1 N=<n> [k=v ...]`` plus the ``# key=value`` block after it.

    Returns ``(header fields, declared count, metadata, index of the first data line)``.
    """
    if not lines:
        raise ParseError("empty file", path, 1, 1)
    toks = _split_line(lines[0].rstrip("\n"))
    if not toks or toks[0][0] != magic:
        raise ParseError(f"missing {magic} header", path, 1, 1)
    if len(toks) < 2 or toks[1][0] != "v1":
        col = toks[1][1] if len(toks) > 1 else len(lines[0]) + 1
        raise ParseError("unsupported format version (expected v1)", path, 1, col)
    head = {}
    for tok, col in toks[2:]:
        if "=" not in tok:
            raise ParseError(f"expected key=value, got {tok!r}", path, 1, col)
        k, v = tok.split("=", 1)
        head[k] = (v, col + len(k) + 1)
    if "N" not in head:
        raise ParseError("header lacks N=<count>", path, 1, len(lines[0].rstrip("\n")) + 1)
    n = _int(head["N"][0], path, 1, head["N"][1])
    if n < 0:
        raise ParseError("negative count", path, 1, head["N"][1])
    meta = {}
    i = 1
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i][1:].strip()
        if body:
            if "=" not in body:
                raise ParseError("metadata line must be '# key=value'", path, i + 1, 2)
            k, v = body.split("=", 1)
            meta[k.strip()] = v.strip()
        i += 1
    return {k: v for k, (v, _) in head.items()}, n, meta, i


def _data_rows(lines, start, n, width, path) -> list:
    rows = []
    for i in range(start, len(lines)):
        text = lines[i].rstrip("\n")
        if not text.strip():
            continue
        if text.lstrip().startswith("#"):
            raise ParseError("comment inside the data block", path, i + 1, 1)
        toks = _split_line(text)
        if len(toks) != width:
            col = toks[width][1] if len(toks) > width else len(text) + 1
            raise ParseError(f"expected {width} fields, found {len(toks)}", path, i + 1, col)
        rows.append((i + 1, toks))
    if len(rows) != n:
        raise ParseError(f"header declares N={n} but {len(rows)} rows follow", path, 1, 1)
    return rows


def _read_lines(path) -> list:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.readlines()
    except UnicodeDecodeError as e:
        raise ParseError(f"not a text file ({e.reason})", path) from None


def _write_atomic(path, text: str):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    os.replace(tmp, path)


# clouds

def cloud_text(cloud: LabeledCloud, meta: Optional[dict] = None) -> str:
    fields = list(CLOUD_FIELDS) + (["graspness"] if cloud.graspness is not None else [])
    out = [f"{CLOUD_MAGIC} v1 N={len(cloud)} fields={','.join(fields)}\n"]
    out += _meta_lines({"version": __version__, **(meta or {})})
    P, Nn, L, G = cloud.points, cloud.normals, cloud.labels, cloud.graspness
    for i in range(len(cloud)):
        row = [fmt(v) for v in P[i]] + [fmt(v) for v in Nn[i]] + [str(int(L[i]))]
        if G is not None:
            row.append(fmt(G[i]))
        out.append(" ".join(row) + "\n")
    return "".join(out)


def write_cloud(path, cloud: LabeledCloud, meta: Optional[dict] = None):
    _write_atomic(path, cloud_text(cloud, meta))


def read_cloud(path) -> tuple:
    """Returns ``(LabeledCloud, metadata)``."""
    lines = _read_lines(path)
    head, n, meta, start = _read_header(lines, CLOUD_MAGIC, path)
    fields = tuple(head.get("fields", ",".join(CLOUD_FIELDS)).split(","))
    if fields[:6] != CLOUD_FIELDS[:6] or not set(fields[6:]) <= {"label", "graspness"} or len(set(fields)) != len(fields):
        raise ParseError(f"unsupported field list {','.join(fields)}", path, 1, lines[0].find("fields=") + 1)
    rows = _data_rows(lines, start, n, len(fields), path)
    pts = np.empty((n, 3))
    nrm = np.empty((n, 3))
    labels = np.full(n, -1, dtype=np.int64)
    g = np.empty(n) if "graspness" in fields else None
    for r, (ln, toks) in enumerate(rows):
        vals = {}
        for name, (tok, col) in zip(fields, toks):
            vals[name] = _int(tok, path, ln, col) if name == "label" else _float(tok, path, ln, col)
        pts[r] = vals["x"], vals["y"], vals["z"]
        nrm[r] = vals["nx"], vals["ny"], vals["nz"]
        if "label" in vals:
            labels[r] = vals["label"]
        if g is not None:
            g[r] = vals["graspness"]
    try:
        cloud = LabeledCloud(pts, nrm, labels, g)
    except PreconditionError as e:
        raise ParseError(str(e), path) from None
    meta["has_labels"] = str(int("label" in fields))
    return cloud, meta


# grasp lists

def grasps_text(grasps: GraspList, gripper: GripperModel, meta: Optional[dict] = None) -> str:
    out = [f"{GRASPS_MAGIC} v1 N={len(grasps)}\n"]
    out += _meta_lines({"version": __version__, **gripper_meta(gripper), **(meta or {})})
    for g in grasps:
        row = [g.score, *g.center, *g.rotation.reshape(-1), g.width, g.depth]
        out.append(" ".join(fmt(v) for v in row) + "\n")
    return "".join(out)


def write_grasps(path, grasps: GraspList, gripper: GripperModel, meta: Optional[dict] = None):
    _write_atomic(path, grasps_text(grasps, gripper, meta))


def read_grasps(path) -> tuple:
    """Returns ``(GraspList, gripper or None, metadata)``."""
    lines = _read_lines(path)
    _, n, meta, start = _read_header(lines, GRASPS_MAGIC, path)
    poses = []
    for ln, toks in _data_rows(lines, start, n, GRASP_FIELDS, path):
        v = [_float(t, path, ln, c) for t, c in toks]
        try:
            poses.append(GraspPose(v[1:4], np.array(v[4:13]).reshape(3, 3), v[13], v[14], v[0]))
        except PreconditionError as e:
            raise ParseError(str(e), path, ln, toks[0][1]) from None
    try:
        grasps = GraspList(tuple(poses))
    except PreconditionError as e:
        raise ParseError(str(e), path) from None
    return grasps, gripper_from_meta(meta, path), meta


def groups_text(rows: list, meta: Optional[dict] = None) -> str:
    """Sidecar rows ``grasp radius slot index cx cy cz`` from ``(grasp, GroupSet)`` pairs."""
    body = []
    for gi, gs in rows:
        for grp in gs.groups:
            for slot, (idx, c) in enumerate(zip(grp.indices, grp.coords)):
                body.append(f"{gi} {fmt(grp.radius)} {slot} {int(idx)} {fmt(c[0])} {fmt(c[1])} {fmt(c[2])}\n")
    head = [f"{GROUPS_MAGIC} v1 N={len(body)}\n"] + _meta_lines({"version": __version__, **(meta or {})})
    return "".join(head + body)


def write_groups(path, rows: list, meta: Optional[dict] = None):
    _write_atomic(path, groups_text(rows, meta))


def read_groups(path) -> tuple:
    """Returns ``(int array (n, 3) of grasp/slot/index, float array (n, 4) of radius/cx/cy/cz, metadata)``."""
    lines = _read_lines(path)
    _, n, meta, start = _read_header(lines, GROUPS_MAGIC, path)
    ints = np.empty((n, 3), dtype=np.int64)
    flts = np.empty((n, 4))
    for r, (ln, toks) in enumerate(_data_rows(lines, start, n, 7, path)):
        ints[r] = [_int(toks[k][0], path, ln, toks[k][1]) for k in (0, 2, 3)]
        flts[r] = [_float(toks[k][0], path, ln, toks[k][1]) for k in (1, 4, 5, 6)]
    return ints, flts, meta


# key=value files (grippers, scene specs)

def _kv_lines(text: str, path):
    """Yield ``(line number, key, key column, value, value column)``; ``[section]`` lines yield key None."""
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        s = line.strip()
        if s.startswith("["):
            if not s.endswith("]"):
                raise ParseError("unterminated section header", path, ln, indent + len(s) + 1)
            yield ln, None, indent + 1, s[1:-1].strip(), indent + 2
            continue
        if "=" not in s:
            raise ParseError("expected 'key = value'", path, ln, indent + 1)
        k, v = line.split("=", 1)
        vcol = len(k) + 2 + (len(v) - len(v.lstrip()))
        if not k.strip():
            raise ParseError("missing key", path, ln, indent + 1)
        if not v.strip():
            raise ParseError(f"missing value for {k.strip()!r}", path, ln, vcol)
        yield ln, k.strip(), indent + 1, v.strip(), vcol


def _floats(v: str, path, ln: Optional[int], col: Optional[int], count: Optional[int] = None) -> tuple:
    out, off = [], 0
    col = col or 1
    for part in v.split(","):
        lead = len(part) - len(part.lstrip())
        tok = part.strip()
        if not tok:
            raise ParseError("empty list element", path, ln, col + off)
        out.append(_float(tok, path, ln, col + off + lead))
        off += len(part) + 1
    if count is not None and len(out) != count:
        raise ParseError(f"expected {count} values, got {len(out)}", path, ln, col)
    return tuple(out)


GRIPPER_KEYS = ("max_width", "finger_length", "finger_thickness", "finger_height", "base_depth", "depth_set")


def gripper_from_pairs(pairs: dict, path=None) -> GripperModel:
    kw = {}
    for k, v in pairs.items():
        if k not in GRIPPER_KEYS:
            raise ParseError(f"unknown gripper key {k!r}", path)
        vals = _floats(str(v), path, None, None)
        kw[k] = vals if k == "depth_set" else vals[0]
        if k != "depth_set" and len(vals) != 1:
            raise ParseError(f"gripper key {k!r} takes one value", path)
    try:
        return GripperModel(**kw)
    except PreconditionError as e:
        raise ParseError(str(e), path) from None


def gripper_text(gripper: GripperModel) -> str:
    return "".join(f"{k} = {_short(v)}\n" for k, v in gripper.as_dict().items())


def read_gripper(path) -> GripperModel:
    """Gripper file: ``key = value`` lines for any of :data:`GRIPPER_KEYS`; missing keys take defaults."""
    text = "".join(_read_lines(path))
    pairs = {}
    for ln, k, kcol, v, vcol in _kv_lines(text, path):
        if k is None:
            raise ParseError("sections are not allowed in a gripper file", path, ln, kcol)
        if k not in GRIPPER_KEYS:
            raise ParseError(f"unknown gripper key {k!r}", path, ln, kcol)
        if k in pairs:
            raise ParseError(f"duplicate key {k!r}", path, ln, kcol)
        _floats(v, path, ln, vcol, None if k == "depth_set" else 1)
        pairs[k] = v
    return gripper_from_pairs(pairs, path)


PRIMITIVE_KEYS = ("kind", "dims", "position", "rotation", "label", "density")
TABLE_KEYS = ("table.size", "table.center", "table.height", "table.density")


def _at(entry, path) -> tuple:
    v, ln, col = entry
    return v, path, ln, col


def _short(v) -> str:
    # shortest round-trip form, for hand-edited files
    if isinstance(v, (list, tuple)):
        return ", ".join(_short(x) for x in v)
    return repr(float(v)) if isinstance(v, float) else str(v)


def parse_scene_spec(text: str, path=None) -> SceneSpec:
    seed = 0
    table = {}
    no_table = False
    prims = []  # (line, column, dict of key -> (value, line, column))
    cur = None
    for ln, k, kcol, v, vcol in _kv_lines(text, path):
        if k is None:
            if v != "primitive":
                raise ParseError(f"unknown section [{v}]", path, ln, vcol)
            cur = {}
            prims.append((ln, kcol, cur))
            continue
        if cur is not None:
            if k not in PRIMITIVE_KEYS:
                raise ParseError(f"unknown primitive key {k!r}", path, ln, kcol)
            if k in cur:
                raise ParseError(f"duplicate key {k!r}", path, ln, kcol)
            cur[k] = (v, ln, vcol)
            continue
        if k == "seed":
            seed = _int(v, path, ln, vcol)
        elif k == "table":
            if v != "none":
                raise ParseError("'table' only accepts the value none", path, ln, vcol)
            no_table = True
        elif k in TABLE_KEYS:
            if k in table:
                raise ParseError(f"duplicate key {k!r}", path, ln, kcol)
            n = {"table.size": 2, "table.center": 2}.get(k, 1)
            vals = _floats(v, path, ln, vcol, n)
            table[k] = vals if n > 1 else vals[0]
        else:
            raise ParseError(f"unknown key {k!r}", path, ln, kcol)

    if no_table and table:
        raise ParseError("'table = none' conflicts with table.* keys", path)
    spec_table = None
    if not no_table:
        d = TableSpec()
        spec_table = TableSpec(
            table.get("table.size", d.size), table.get("table.center", d.center),
            table.get("table.height", d.height), table.get("table.density", d.density),
        )
        if min(spec_table.size) <= 0 or spec_table.density <= 0:
            raise ParseError("table size and density must be positive", path)

    out = []
    labels = {}
    for ln, col, kv in prims:
        for req in ("kind", "dims", "label"):
            if req not in kv:
                raise ParseError(f"primitive lacks {req!r}", path, ln, col)
        kind = kv["kind"][0]
        dims = _floats(*_at(kv["dims"], path))
        pos = _floats(*_at(kv["position"], path), 3) if "position" in kv else (0.0, 0.0, 0.0)
        rot = _floats(*_at(kv["rotation"], path), 3) if "rotation" in kv else (0.0, 0.0, 0.0)
        label = _int(*_at(kv["label"], path))
        density = _floats(*_at(kv["density"], path), 1)[0] if "density" in kv else 1e5
        if label in labels:
            raise ParseError(f"label {label} already used on line {labels[label]}", path, kv["label"][1], kv["label"][2])
        labels[label] = ln
        try:
            out.append(PrimitiveSpec(kind, dims, pos, rot, label, density))
        except PreconditionError as e:
            raise ParseError(str(e), path, ln, col) from None
    return SceneSpec(tuple(out), spec_table, seed)


def read_scene_spec(path) -> SceneSpec:
    return parse_scene_spec("".join(_read_lines(path)), path)


def scene_spec_text(spec: SceneSpec) -> str:
    out = [f"seed = {spec.rng_seed}\n"]
    t = spec.table
    if t is None:
        out.append("table = none\n")
    else:
        out += [
            f"table.size = {_short(tuple(float(x) for x in t.size))}\n",
            f"table.center = {_short(tuple(float(x) for x in t.center))}\n",
            f"table.height = {_short(float(t.height))}\n",
            f"table.density = {_short(float(t.density))}\n",
        ]
    for p in spec.primitives:
        out += [
            "\n[primitive]\n",
            f"kind = {p.kind}\n",
            f"dims = {_short(p.dims)}\n",
            f"position = {_short(p.position)}\n",
            f"rotation = {_short(p.rotation)}\n",
            f"label = {p.label}\n",
            f"density = {_short(p.density)}\n",
        ]
    return "".join(out)


# graspness cache

def graspness_key(cloud: LabeledCloud, grid, gripper: GripperModel, params) -> str:
    """Content hash of everything annotation depends on."""
    h = hashlib.sha256()
    h.update(f"graspkit {__version__}\n".encode())
    for a in (cloud.points, cloud.normals, grid.views):
        h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
    h.update(repr((grid.num_angles, grid.depths, params.mu_grid, params.c, params.clearance,
                   params.min_inner, params.denominator, sorted(gripper.as_dict().items()))).encode())
    return h.hexdigest()


def cache_path(cloud_path, key: str) -> Path:
    p = Path(cloud_path)
    return p.with_name(f"{p.name}.graspness.{key[:16]}.npy")


def load_cached_graspness(path, n: int) -> Optional[np.ndarray]:
    try:
        g = np.load(path, allow_pickle=False)
    except (OSError, ValueError):
        return None
    if g.shape != (n,) or g.dtype != np.float64 or not np.all((g >= 0) & (g <= 1)):
        return None
    return g


def save_cached_graspness(path, g: np.ndarray):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp.npy")
    np.save(tmp, np.asarray(g, dtype=np.float64))
    os.replace(tmp, path)
