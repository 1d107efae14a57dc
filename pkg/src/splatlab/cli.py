"""Single multi-command entry point.

Every subcommand is a pure function of its inputs and the --seed flag:
re-running with identical inputs produces byte-identical outputs, and
--threads never changes results. Human-readable text goes to stdout;
errors are emitted as single-line JSON on stderr with exit code 1.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import losses, masks, metrics, recolor, report, splat
from .core import CameraPose, IntrinsicsSpec, load_feature_set, load_image, save_image
from .errors import SplatlabError, ValidationError


def _fail(exc: BaseException) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload, separators=(",", ":")), file=sys.stderr)
    return 1


def _load_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON {path}: {exc.msg} at byte offset {exc.pos}") from exc


def _write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_provenance(path, seed: int, **extra) -> None:
    _write_json({"seed": seed, **extra}, path)


def _config_overlay(args) -> dict:
    return _load_json(args.config) if getattr(args, "config", None) else {}


# ---------------------------------------------------------------- filter


def cmd_filter(args) -> int:
    cfg_json = _config_overlay(args)
    overrides = {
        key: getattr(args, key)
        for key in ("a_min", "s_min", "q_min", "r_min", "r_max", "m_edge", "n_max")
        if getattr(args, key) is not None
    }
    cfg = masks.FilterConfig(**{**cfg_json.get("filter", {}), **overrides})
    proposals = masks.load_proposals(args.proposals)
    kept = masks.filter_proposals(proposals, (args.size[0], args.size[1]), cfg)
    out = args.output or (str(args.proposals) + ".filtered.json")
    masks.save_proposals(kept, out)
    _write_provenance(str(out) + ".provenance.json", args.seed, command="filter", kept=len(kept),
                      total=len(proposals))
    print(f"kept {len(kept)}/{len(proposals)} proposals -> {out}")
    return 0


# ---------------------------------------------------------------- accept


def cmd_accept(args) -> int:
    if args.ids:
        id_sets = _load_json(args.ids)
        frames = [
            masks.TrackedMaskSet(frame_index=i, object_ids=frozenset(int(x) for x in ids),
                                 masks={int(x): np.zeros((1, 1)) for x in ids})
            for i, ids in enumerate(id_sets)
        ]
    else:
        if not args.size:
            raise ValidationError("--size is required with --tracked")
        frames = masks.load_tracked_dir(args.tracked, tuple(args.size))
    flagged = masks.accept_frames(frames, threshold=args.threshold)
    result = [{"frame_index": f.frame_index, "object_ids": sorted(f.object_ids), "accepted": f.accepted}
              for f in flagged]
    if args.output:
        _write_json({"seed": args.seed, "threshold": args.threshold, "frames": result}, args.output)
    accepted = sum(1 for r in result if r["accepted"])
    print(json.dumps(result))
    print(f"accepted {accepted}/{len(result)} frames")
    return 0


# ---------------------------------------------------------------- recolor


def cmd_recolor(args) -> int:
    frame_paths = sorted(Path(args.frames).glob("*.png"))
    if not frame_paths:
        raise FileNotFoundError(f"no PNG frames in {args.frames}")
    frames = [load_image(p) for p in frame_paths]
    size = (frames[0].width, frames[0].height)
    tracked_paths = sorted(Path(args.tracked).glob("*.ftc"))
    if len(tracked_paths) != len(frames):
        missing = min(len(tracked_paths), len(frames))
        raise ValidationError(
            f"misaligned frames/masks: {len(frames)} frames but {len(tracked_paths)} tracked files "
            f"(first unmatched: frame {missing})"
        )
    tracked = [masks.load_tracked_frame(p, size, i) for i, p in enumerate(tracked_paths)]
    flagged = masks.accept_frames(tracked)
    if args.identity:
        aug_cfg = recolor.AugmentationConfig.identity()
    elif "augmentation" in _config_overlay(args):
        aug_cfg = recolor.AugmentationConfig.from_json(_config_overlay(args)["augmentation"])
    else:
        aug_cfg = recolor.AugmentationConfig()

    kept_idx = [i for i, f in enumerate(flagged) if f.accepted]
    kept_tracked = [flagged[i] for i in kept_idx]
    kept_frames = [frames[i] for i in kept_idx]
    outputs = recolor.recolor_sequence(kept_frames, kept_tracked, args.seed, aug_cfg,
                                       eps=args.eps, threads=args.threads)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, img in zip(kept_idx, outputs):
        save_image(img, out_dir / frame_paths[i].name)
    jobs = recolor.build_jobs(kept_tracked, args.seed, aug_cfg)
    _write_provenance(
        out_dir / "provenance.json",
        args.seed,
        command="recolor",
        augmentation=aug_cfg.to_json(),
        regions={str(j.region_id): j.params.digest() for j in jobs},
        frames=[{"name": frame_paths[i].name, "accepted": flagged[i].accepted} for i in range(len(frames))],
    )
    print(f"recolored {len(kept_idx)}/{len(frames)} frames -> {out_dir}")
    return 0


# ---------------------------------------------------------------- splat family


def _parse_pose(values) -> CameraPose:
    qw, qx, qy, qz, tx, ty, tz = values
    return CameraPose(np.array([qw, qx, qy, qz]), np.array([tx, ty, tz]))


def _parse_bg(text: str) -> tuple[float, float, float]:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise ValidationError(f"--bg needs three comma-separated values, got {text!r}")
    return tuple(parts)


def cmd_render(args) -> int:
    scene = splat.load_ply(args.scene)
    pose = _parse_pose(args.pose)
    fx, fy, cx, cy = args.intrinsics
    k = IntrinsicsSpec(fx=fx, fy=fy, cx=cx, cy=cy, width=args.size[0], height=args.size[1])
    cfg = splat.RenderConfig(background=_parse_bg(args.bg), tile_size=args.tile_size)
    image = splat.rasterize(scene, pose, k, cfg, threads=args.threads)
    save_image(image, args.output)
    _write_provenance(str(args.output) + ".provenance.json", args.seed, command="render",
                      scene=str(args.scene), pose=list(args.pose), intrinsics=list(args.intrinsics),
                      size=list(args.size), background=list(cfg.background), tile_size=cfg.tile_size)
    print(f"rendered {len(scene)} gaussians -> {args.output}")
    return 0


def cmd_fuse(args) -> int:
    scenes = [splat.load_ply(p) for p in args.scenes]
    fused = splat.fuse_scenes(scenes)
    splat.save_ply(fused, args.output)
    _write_provenance(str(args.output) + ".provenance.json", args.seed, command="fuse",
                      inputs=[str(p) for p in args.scenes], primitives=len(fused))
    print(f"fused {len(scenes)} scenes ({len(fused)} gaussians) -> {args.output}")
    return 0


def cmd_drop(args) -> int:
    scene = splat.load_ply(args.scene)
    dropped = splat.drop_view(scene, args.view, args.p, args.seed)
    splat.save_ply(dropped, args.output)
    removed = len(scene) - len(dropped)
    _write_provenance(str(args.output) + ".provenance.json", args.seed, command="drop",
                      view=args.view, p=args.p, removed=removed)
    print(f"{'dropped' if removed else 'kept'} view {args.view} ({removed} gaussians removed) -> {args.output}")
    return 0


# ---------------------------------------------------------------- loss / metrics


def _paired_embedding_mean(path_a, path_b, kind: str) -> float:
    fa, fb = load_feature_set(path_a), load_feature_set(path_b)
    if fa.count != fb.count:
        raise ValidationError(f"feature sets not aligned: {fa.count} vs {fb.count} vectors")
    vals = [losses.embedding_distance(a, b, kind) for a, b in zip(fa.vectors, fb.vectors)]
    return float(np.mean(vals))


def cmd_loss(args) -> int:
    cfg_json = _config_overlay(args)
    weights = losses.LossWeights(**cfg_json["weights"]) if "weights" in cfg_json else losses.LossWeights()
    out: dict = {}
    if args.mse:
        out["mse"] = losses.mse_loss(load_image(args.mse[0]), load_image(args.mse[1]))
    if args.clip:
        out["clip"] = _paired_embedding_mean(args.clip[0], args.clip[1], "cosine_loss")
    if args.lpips:
        out["lpips"] = _paired_embedding_mean(args.lpips[0], args.lpips[1], "l2")
    if args.center:
        pred = np.array([g.center for g in splat.load_ply(args.center[0]).primitives])
        ref = np.array([g.center for g in splat.load_ply(args.center[1]).primitives])
        out["center"] = losses.smooth_l1_centers(pred, ref, beta=args.beta)
    if args.geom:
        sets = [np.array([g.center for g in splat.load_ply(p).primitives]) for p in args.geom]
        out["geom"] = losses.geom_consistency_loss(sets, sample_size=args.sample_size, seed=args.seed)
    if not out:
        raise ValidationError("no loss term requested")
    if args.total or len(out) == 5:
        out["total"] = losses.total_loss(weights=weights, **out).total
    out["seed"] = args.seed
    line = json.dumps(out, sort_keys=True)
    print(line)
    if args.output:
        _write_json(out, args.output)
    return 0


def cmd_metrics(args) -> int:
    out: dict = {}
    if args.fid:
        out["fid"] = metrics.frechet_distance(load_feature_set(args.fid[0]), load_feature_set(args.fid[1]))
    if args.kid:
        x, y = load_feature_set(args.kid[0]), load_feature_set(args.kid[1])
        size = min(args.subset_size, x.count, y.count)
        out["kid"] = metrics.kernel_mmd(x, y, subset_size=size, n_subsets=args.n_subsets, seed=args.seed)
    if args.clip_t2i:
        prompt = load_feature_set(args.clip_t2i[0])
        images = load_feature_set(args.clip_t2i[1])
        out["clip_t2i"] = metrics.clip_t2i(prompt.vectors[0], images)
    if not out:
        raise ValidationError("no metric requested")
    out["seed"] = args.seed
    print(json.dumps(out, sort_keys=True))
    if args.output:
        _write_json(out, args.output)
    return 0


# ---------------------------------------------------------------- bench


def cmd_bench_make_manifest(args) -> int:
    manifest = bench_mod.build_manifest(
        args.scene_dir,
        args.prompts,
        targets={"scenes": args.scenes, "prompts_per_scene": args.prompts_per_scene},
        base_seed=args.seed,
    )
    bench_mod.save_manifest(manifest, args.output)
    counts = bench_mod.validate_manifest(manifest).category_counts
    print(f"{len(manifest.instances)} instances over {len(manifest.scenes)} scenes -> {args.output}")
    print(f"category counts: {json.dumps(counts, sort_keys=True)}")
    return 0


def cmd_bench_validate(args) -> int:
    manifest = bench_mod.load_manifest(args.manifest)
    vr = bench_mod.validate_manifest(manifest, root=args.root, strict=args.strict)
    print(json.dumps(vr.to_json(), sort_keys=True))
    if args.output:
        _write_json(vr.to_json(), args.output)
    return 0 if vr.ok else 1


def cmd_bench_evaluate(args) -> int:
    manifest = bench_mod.load_manifest(args.manifest)
    timings = {str(k): float(v) for k, v in _load_json(args.timings).items()}
    result = bench_mod.evaluate_run(
        manifest,
        args.render_dir,
        args.features_dir,
        timings,
        subset_size=args.subset_size,
        n_subsets=args.n_subsets,
        seed=args.seed,
    )
    written = report.write_report_files(result, args.output, figures=not args.no_figures)
    print(report.render_table(result))
    print(f"report files: {json.dumps(written, sort_keys=True)}")
    return 0


# ---------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed; recorded in all provenance")
    p.add_argument("--threads", type=int, default=1, help="worker threads (never changes results)")
    p.add_argument("--config", type=str, default=None, help="JSON file with extra configuration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splatlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="apply the multi-criterion proposal filter")
    p.add_argument("proposals", help="proposal JSON file")
    p.add_argument("--size", type=int, nargs=2, required=True, metavar=("W", "H"))
    for flag, typ in (("a-min", int), ("s-min", float), ("q-min", float), ("r-min", float),
                      ("r-max", float), ("m-edge", int), ("n-max", int)):
        p.add_argument(f"--{flag}", type=typ, default=None)
    p.add_argument("-o", "--output", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("accept", help="identity-drift frame acceptance scan")
    p.add_argument("--ids", default=None, help="JSON list of per-frame object-ID lists")
    p.add_argument("--tracked", default=None, help="directory of per-frame logit .ftc files")
    p.add_argument("--size", type=int, nargs=2, default=None, metavar=("W", "H"))
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("-o", "--output", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_accept)

    p = sub.add_parser("recolor", help="cross-view-consistent region recoloring")
    p.add_argument("--frames", required=True, help="directory of input PNG frames")
    p.add_argument("--tracked", required=True, help="directory of per-frame logit .ftc files")
    p.add_argument("--identity", action="store_true", help="force identity parameters")
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("-o", "--output", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(func=cmd_recolor)

    p = sub.add_parser("render", help="rasterize a PLY scene to PNG")
    p.add_argument("scene")
    p.add_argument("--pose", type=float, nargs=7, required=True, metavar=("QW", "QX", "QY", "QZ", "TX", "TY", "TZ"))
    p.add_argument("--intrinsics", type=float, nargs=4, required=True, metavar=("FX", "FY", "CX", "CY"))
    p.add_argument("--size", type=int, nargs=2, required=True, metavar=("W", "H"))
    p.add_argument("--bg", default="0,0,0")
    p.add_argument("--tile-size", type=int, default=16)
    p.add_argument("-o", "--output", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("fuse", help="concatenate scenes in the canonical frame")
    p.add_argument("scenes", nargs="+")
    p.add_argument("-o", "--output", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("drop", help="randomly drop one view's gaussians")
    p.add_argument("scene")
    p.add_argument("--view", type=int, required=True)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("-o", "--output", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_drop)

    p = sub.add_parser("loss", help="compute training-loss terms from files")
    p.add_argument("--mse", nargs=2, metavar=("PRED_PNG", "GT_PNG"))
    p.add_argument("--clip", nargs=2, metavar=("PRED_FTC", "GT_FTC"))
    p.add_argument("--lpips", nargs=2, metavar=("PRED_FTC", "GT_FTC"))
    p.add_argument("--center", nargs=2, metavar=("PRED_PLY", "REF_PLY"))
    p.add_argument("--geom", nargs="+", metavar="PLY")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--sample-size", type=int, default=1024)
    p.add_argument("--total", action="store_true", help="also report the weighted total")
    p.add_argument("-o", "--output", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("metrics", help="feature-space benchmark metrics")
    p.add_argument("--fid", nargs=2, metavar=("A_FTC", "B_FTC"))
    p.add_argument("--kid", nargs=2, metavar=("A_FTC", "B_FTC"))
    p.add_argument("--clip-t2i", nargs=2, metavar=("PROMPT_FTC", "IMAGES_FTC"))
    p.add_argument("--subset-size", type=int, default=100)
    p.add_argument("--n-subsets", type=int, default=10)
    p.add_argument("-o", "--output", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="benchmark manifest and evaluation tools")
    bench_sub = p.add_subparsers(dest="bench_command", required=True)

    q = bench_sub.add_parser("make-manifest")
    q.add_argument("--scene-dir", required=True)
    q.add_argument("--prompts", required=True)
    q.add_argument("--scenes", type=int, default=20)
    q.add_argument("--prompts-per-scene", type=int, default=5)
    q.add_argument("-o", "--output", required=True)
    _add_common(q)
    q.set_defaults(func=cmd_bench_make_manifest)

    q = bench_sub.add_parser("validate")
    q.add_argument("manifest")
    q.add_argument("--root", default=None)
    q.add_argument("--strict", action="store_true")
    q.add_argument("-o", "--output", default=None)
    _add_common(q)
    q.set_defaults(func=cmd_bench_validate)

    q = bench_sub.add_parser("evaluate")
    q.add_argument("manifest")
    q.add_argument("--render-dir", required=True)
    q.add_argument("--features-dir", required=True)
    q.add_argument("--timings", required=True)
    q.add_argument("--subset-size", type=int, default=100)
    q.add_argument("--n-subsets", type=int, default=10)
    q.add_argument("--no-figures", action="store_true")
    q.add_argument("-o", "--output", required=True)
    _add_common(q)
    q.set_defaults(func=cmd_bench_evaluate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SplatlabError, FileNotFoundError, OSError, KeyError) as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
