"""Command line interface: gen, annotate, detect, eval, report.

Exit codes: 0 success, 2 parse error, 3 precondition failure, 4 consistency
failure (gripper mismatch), 1 anything else.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import __version__
from .core import GripperModel
from .errors import ConsistencyError, GraspkitError, ParseError, PreconditionError
from .evaluation import ap_overall
from .formats import (
    _write_atomic, cache_path, graspness_key, gripper_meta, load_cached_graspness, read_cloud, read_grasps,
    read_gripper, read_scene_spec, save_cached_graspness, write_cloud, write_grasps, write_groups,
)
from .grouping import DEFAULT_RADII
from .pipeline import PipelineConfig, annotate, detect
from .quality import DEFAULT_MU_GRID, QualityParams
from .scenegen import SceneSpec, build_scene
from .spatial import build_index

REPORT_MAGIC = "#graspkit-report v1"


def _floats(text: str, name: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"{name} must be a comma-separated list of numbers") from None


def _radii(text):
    return _floats(text, "--radii")


def _mu_grid(text):
    return _floats(text, "--mu-grid")


def _warn(msg: str):
    print(f"graspkit: warning: {msg}", file=sys.stderr)


def _info(msg: str, quiet: bool):
    if not quiet:
        print(msg, file=sys.stderr)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="RNG seed (for gen, overrides the scene file's seed)")
    p.add_argument("--threads", type=int, default=1, help="worker threads; outputs do not depend on it")
    p.add_argument("--gripper", type=Path, default=None, help="gripper key=value file (default gripper otherwise)")
    p.add_argument("--quiet", action="store_true", help="suppress progress messages")


def _grid_quality(p: argparse.ArgumentParser):
    p.add_argument("--views", type=int, default=60, help="approach views V (Fibonacci sphere)")
    p.add_argument("--angles", type=int, default=12, help="in-plane angles A on [0, pi)")
    p.add_argument("--mu-grid", type=_mu_grid, default=DEFAULT_MU_GRID, help="ascending friction coefficients")
    p.add_argument("--score-threshold", type=float, default=0.5, help="graspness quality threshold c")
    p.add_argument("--clearance", type=float, default=0.01, help="added to the closing width, meters")
    p.add_argument("--min-inner-points", type=int, default=1, help="points required between the jaws")
    p.add_argument("--denominator", choices=("all", "collision_free"), default="all",
                   help="graspness denominator: every candidate or collision-free ones only")


def _detect_flags(p: argparse.ArgumentParser):
    p.add_argument("--sampling", choices=("gbs", "fps"), default="gbs",
                   help="graspable balanced sampling, or scene-wide FPS over graspable points")
    p.add_argument("--num-samples", type=int, default=256, help="sampled grasp points M")
    p.add_argument("--graspness-threshold", type=float, default=0.1, help="graspable iff graspness > this")
    p.add_argument("--radii", type=_radii, default=DEFAULT_RADII, help="grouping radii r1,r2,r3,r4 (meters)")
    p.add_argument("--nsample", type=int, default=64, help="points kept per group")
    p.add_argument("--group-shape", choices=("cylinder", "ball"), default="cylinder")
    p.add_argument("--max-approach-angle", type=float, default=180.0,
                   help="degrees from straight down; 180 disables the filter")
    p.add_argument("--nms-trans", type=float, default=0.03, help="NMS center distance, meters")
    p.add_argument("--nms-rot", type=float, default=30.0, help="NMS rotation angle, degrees")
    p.add_argument("--top-k", type=int, default=50, help="grasps written")
    p.add_argument("--groups", type=Path, default=None, help="group sidecar path (default <out>.groups)")
    p.add_argument("--no-cache", action="store_true", help="neither read nor write the graspness cache")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graspkit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"graspkit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="build a labeled cloud from a scene-spec file")
    p.add_argument("spec", type=Path)
    p.add_argument("out", type=Path)
    _common(p)

    p = sub.add_parser("annotate", help="write a cloud with per-point graspness")
    p.add_argument("cloud", type=Path)
    p.add_argument("out", type=Path)
    _common(p)
    _grid_quality(p)

    p = sub.add_parser("detect", help="analytic grasp detection")
    p.add_argument("cloud", type=Path)
    p.add_argument("out", type=Path)
    _common(p)
    _grid_quality(p)
    _detect_flags(p)

    p = sub.add_parser("eval", help="precision@k / AP report for a grasp list")
    p.add_argument("grasps", type=Path)
    p.add_argument("cloud", type=Path)
    p.add_argument("out", type=Path, help="text report")
    p.add_argument("--kv", type=Path, default=None, help="key=value report path (default <out>.kv)")
    p.add_argument("--top-k", type=int, default=50, help="K in precision@k, k = 1..K")
    p.add_argument("--mu-grid", type=_mu_grid, default=DEFAULT_MU_GRID)
    p.add_argument("--min-inner-points", type=int, default=1)
    _common(p)

    p = sub.add_parser("report", help="tabulate key=value eval reports side by side")
    p.add_argument("reports", type=Path, nargs="+")
    p.add_argument("--out", type=Path, default=None)
    return ap


def _gripper(args) -> GripperModel:
    return read_gripper(args.gripper) if args.gripper is not None else GripperModel()


def _quality(args) -> QualityParams:
    return QualityParams(tuple(args.mu_grid), args.score_threshold, args.clearance, args.min_inner_points,
                         args.denominator)


def _config(args) -> PipelineConfig:
    return PipelineConfig(
        sampling=args.sampling, num_samples=args.num_samples, views=args.views, angles=args.angles,
        radii=tuple(args.radii), nsample=args.nsample, group_shape=args.group_shape, quality=_quality(args),
        graspness_threshold=args.graspness_threshold, nms_trans=args.nms_trans, nms_rot=args.nms_rot,
        max_approach_angle=args.max_approach_angle, top_k=args.top_k,
        seed=0 if args.seed is None else args.seed, threads=args.threads, gripper=_gripper(args),
    ).validate()


def cmd_gen(args) -> int:
    spec = read_scene_spec(args.spec)
    if args.seed is not None:
        spec = SceneSpec(spec.primitives, spec.table, args.seed)
    cloud = build_scene(spec)
    write_cloud(args.out, cloud, {"source": "gen", "config.seed": spec.rng_seed,
                                  "config.primitives": len(spec.primitives)})
    _info(f"wrote {len(cloud)} points, {len(cloud.object_labels)} objects to {args.out}", args.quiet)
    return 0


def _annotated(cloud, meta, cloud_path, config: PipelineConfig, use_cache: bool, quiet: bool):
    """Cloud with graspness for ``config``: from the file, the cache, or freshly computed."""
    grid = config.grid()
    key = graspness_key(cloud, grid, config.gripper, config.quality)
    if cloud.graspness is not None and meta.get("graspness_key") == key:
        return cloud, key
    cpath = cache_path(cloud_path, key)
    if use_cache:
        g = load_cached_graspness(cpath, len(cloud))
        if g is not None:
            _info(f"graspness from cache {cpath.name}", quiet)
            return cloud.with_graspness(g), key
    _info(f"annotating {len(cloud)} points x {grid.size} candidates", quiet)
    out = annotate(cloud.with_graspness(None), config)
    if use_cache:
        try:
            save_cached_graspness(cpath, out.graspness)
        except OSError as e:
            _warn(f"could not write graspness cache: {e}")
    return out, key


def cmd_annotate(args) -> int:
    gripper = _gripper(args)
    config = PipelineConfig(views=args.views, angles=args.angles, quality=_quality(args), threads=args.threads,
                            gripper=gripper)
    if args.views < 1 or args.angles < 1 or args.threads < 1:
        raise PreconditionError("views, angles and threads must be >= 1")
    cloud, meta = read_cloud(args.cloud)
    out, key = _annotated(cloud, meta, args.cloud, config, False, args.quiet)
    q = config.quality
    write_cloud(args.out, out, {
        "source": "annotate", "graspness_key": key, **gripper_meta(gripper),
        "config.views": config.views, "config.angles": config.angles, "config.mu_grid": q.mu_grid,
        "config.score_threshold": float(q.c), "config.clearance": float(q.clearance),
        "config.min_inner_points": q.min_inner, "config.denominator": q.denominator,
    })
    _info(f"wrote {args.out}", args.quiet)
    return 0


def cmd_detect(args) -> int:
    config = _config(args)
    cloud, meta = read_cloud(args.cloud)
    if config.sampling == "gbs" and meta.get("has_labels") == "0":
        raise PreconditionError("gbs sampling needs object labels; the cloud file has none")
    cloud, key = _annotated(cloud, meta, args.cloud, config, not args.no_cache, args.quiet)
    index = build_index(cloud)
    det = detect(cloud, config, index)
    for w in det.warnings:
        _warn(w)
    header = {**config.as_meta(), "graspness_key": key}
    write_grasps(args.out, det.grasps, config.gripper, header)
    groups_path = args.groups or args.out.with_name(args.out.name + ".groups")
    write_groups(groups_path, list(det.groups), {"config.radii": tuple(config.radii),
                                                 "config.nsample": config.nsample,
                                                 "config.group_shape": config.group_shape})
    s = det.stats
    _info(f"sampled {s['sampled']}, nonzero {s['nonzero']}, wrote {len(det.grasps)} grasps to {args.out}",
          args.quiet)
    return 0


def _same_gripper(a: GripperModel, b: GripperModel) -> bool:
    da, db = a.as_dict(), b.as_dict()
    return all(
        (len(da[k]) == len(db[k]) and all(math.isclose(x, y, rel_tol=0, abs_tol=1e-12) for x, y in zip(da[k], db[k])))
        if k == "depth_set" else math.isclose(da[k], db[k], rel_tol=0, abs_tol=1e-12)
        for k in da
    )


def cmd_eval(args) -> int:
    gripper = _gripper(args)
    if args.top_k < 1:
        raise PreconditionError("--top-k must be >= 1")
    params = QualityParams(tuple(args.mu_grid), min_inner=args.min_inner_points)
    grasps, recorded, gmeta = read_grasps(args.grasps)
    if recorded is None:
        raise ConsistencyError("grasp file does not record its gripper")
    if not _same_gripper(recorded, gripper):
        raise ConsistencyError(f"grasp file gripper {recorded.as_dict()} differs from {gripper.as_dict()}")
    for g in grasps:
        g.validate(gripper)
    cloud, _ = read_cloud(args.cloud)
    report = ap_overall(grasps, cloud, gripper, params, args.top_k, threads=args.threads)
    meta = {"version": __version__, "grasps": args.grasps.name, "cloud": args.cloud.name,
            "config.mu_grid": ",".join(repr(float(m)) for m in params.mu_grid),
            "config.top_k": args.top_k, "config.min_inner_points": args.min_inner_points}
    head = f"# graspkit {__version__} eval\n" + "".join(f"# {k}={v}\n" for k, v in meta.items() if k != "version")
    _write_atomic(args.out, head + "\n" + report.to_text())
    kv = {**meta, **report.as_kv()}
    kv_path = args.kv or args.out.with_name(args.out.name + ".kv")
    _write_atomic(kv_path, REPORT_MAGIC + "\n" + "".join(f"{k}={v}\n" for k, v in kv.items()))
    _info(f"AP {100 * report.ap:.2f} over {len(grasps)} grasps; wrote {args.out} and {kv_path}", args.quiet)
    return 0


def read_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0].strip() != REPORT_MAGIC:
        raise ParseError(f"missing {REPORT_MAGIC} header", path, 1, 1)
    out = {}
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError("expected key=value", path, ln, 1)
        k, v = line.split("=", 1)
        out[k] = v
    return out


def cmd_report(args) -> int:
    cols = ("AP", "AP_0.8", "AP_0.4", "AP_S", "AP_M", "AP_L", "AP_scale_mean")
    rows = []
    for p in args.reports:
        kv = read_report(p)
        vals = []
        for c in cols:
            v = kv.get(c)
            vals.append(f"{100 * float(v):.2f}" if v is not None else "-")
        rows.append((p.name, kv.get("n_grasps", "-"), vals))
    w = max([len("report")] + [len(r[0]) for r in rows])
    lines = [f"{'report':<{w}}  {'grasps':>6}  " + "  ".join(f"{c:>8}" for c in cols)]
    for name, n, vals in rows:
        lines.append(f"{name:<{w}}  {n:>6}  " + "  ".join(f"{v:>8}" for v in vals))
    text = "\n".join(lines) + "\n"
    if args.out is not None:
        _write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {"gen": cmd_gen, "annotate": cmd_annotate, "detect": cmd_detect, "eval": cmd_eval, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return COMMANDS[args.command](args)
    except GraspkitError as e:
        print(f"graspkit: error: {e}", file=sys.stderr)
        return e.exit_code
    except FileNotFoundError as e:
        print(f"graspkit: error: {e}", file=sys.stderr)
        return PreconditionError.exit_code
    except Exception as e:  # noqa: BLE001
        print(f"graspkit: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
