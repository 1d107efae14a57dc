"""Batch export CLI: segmentation proposals, propagated mask logits, and
image/prompt embeddings, all in the downstream toolkit's file formats."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import AdapterConfig, AdapterError, write_provenance
from .embed import export_image_embeddings, export_prompt_embeddings
from .segment import export_proposals
from .track import export_track_logits


def _cfg_from_args(args) -> AdapterConfig:
    settings = {}
    if getattr(args, "settings", None):
        settings = json.loads(Path(args.settings).read_text(encoding="utf-8"))
    return AdapterConfig(
        segmenter=getattr(args, "segmenter", AdapterConfig.segmenter),
        tracker=getattr(args, "tracker", AdapterConfig.tracker),
        image_embedder=getattr(args, "image_model", AdapterConfig.image_embedder),
        text_embedder=getattr(args, "text_model", AdapterConfig.text_embedder),
        device=args.device,
        output_dir=str(args.out),
        embedding_dim=getattr(args, "dim", 64),
        generator_settings=settings,
    )


def cmd_export_proposals(args) -> int:
    cfg = _cfg_from_args(args)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    out_path = export_proposals(args.frames, cfg)
    count = len(json.loads(out_path.read_text(encoding="utf-8")))
    write_provenance(cfg, "export-proposals", args.out, frames=str(args.frames), proposals=count)
    if count == 0:
        print("warning: empty proposal set", file=sys.stderr)
    print(f"{count} proposals -> {out_path}")
    return 0


def cmd_export_tracks(args) -> int:
    cfg = _cfg_from_args(args)
    ids = [int(x) for x in args.ids.split(",")] if args.ids else None
    written = export_track_logits(args.frames, args.proposals, cfg, selected_ids=ids)
    write_provenance(cfg, "export-tracks", args.out, frames=str(args.frames),
                     proposals=str(args.proposals), frame_count=len(written))
    print(f"{len(written)} logit containers -> {args.out}")
    return 0


def cmd_export_embeddings(args) -> int:
    cfg = _cfg_from_args(args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.images:
        path = export_image_embeddings(args.images, cfg, out)
        source = str(args.images)
    else:
        rows = json.loads(Path(args.prompts).read_text(encoding="utf-8"))
        prompts = [r["prompt"] for r in rows]
        labels = [str(r.get("id", i)) for i, r in enumerate(rows)]
        path = export_prompt_embeddings(prompts, labels, cfg, out)
        source = str(args.prompts)
    write_provenance(cfg, "export-embeddings", out.parent, source=source, container=str(path))
    print(f"embeddings -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splatlab-adapter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export-proposals", help="segment the first frame into proposals + mask PNGs")
    p.add_argument("--frames", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--segmenter", default=AdapterConfig.segmenter)
    p.add_argument("--settings", default=None, help="JSON file of generator settings, recorded verbatim")
    p.add_argument("--device", default="cpu")
    p.set_defaults(func=cmd_export_proposals)

    p = sub.add_parser("export-tracks", help="propagate proposal masks and export per-frame logits")
    p.add_argument("--frames", required=True)
    p.add_argument("--proposals", required=True)
    p.add_argument("--ids", default=None, help="comma-separated proposal ids (default: all)")
    p.add_argument("--out", required=True)
    p.add_argument("--tracker", default=AdapterConfig.tracker)
    p.add_argument("--settings", default=None)
    p.add_argument("--device", default="cpu")
    p.set_defaults(func=cmd_export_tracks)

    p = sub.add_parser("export-embeddings", help="embed images or prompts into one .ftc container")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--images", default=None)
    group.add_argument("--prompts", default=None, help="JSON array of {id, prompt}")
    p.add_argument("--out", required=True)
    p.add_argument("--image-model", default=AdapterConfig.image_embedder)
    p.add_argument("--text-model", default=AdapterConfig.text_embedder)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--settings", default=None)
    p.add_argument("--device", default="cpu")
    p.set_defaults(func=cmd_export_embeddings)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AdapterError, FileNotFoundError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
