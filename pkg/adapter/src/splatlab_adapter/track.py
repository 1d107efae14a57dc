"""Mask propagation over a frame sequence, exported as per-frame logits.

The builtin tracker carries each selected object's binary mask forward with
dense Farneback optical flow, then converts the mask to signed-distance
logits (positive strictly inside, negative strictly outside), so thresholding
the exported logits at zero reproduces the tracker's own binary masks
exactly. Objects that shrink to nothing are recorded as lost and omitted
from later frames.
"""
from __future__ import annotations

import json
from pathlib import Path

import cv2
import numpy as np

from .config import AdapterConfig, AdapterError, require_builtin
from .formats import read_mask_png16, write_ftc
from .segment import _frame_paths, load_frame_rgb


def signed_distance_logits(mask: np.ndarray, scale: float = 4.0) -> np.ndarray:
    """Signed distance in pixels, divided by scale; zero only off-lattice."""
    inside = mask.astype(np.uint8)
    dist_in = cv2.distanceTransform(inside, cv2.DIST_L2, 3)
    dist_out = cv2.distanceTransform(1 - inside, cv2.DIST_L2, 3)
    return (dist_in - dist_out) / scale


def warp_mask(mask: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Pull the previous soft mask along the backward flow field."""
    h, w = mask.shape
    grid_x, grid_y = np.meshgrid(np.arange(w, dtype=np.float32), np.arange(h, dtype=np.float32))
    map_x = grid_x + flow[..., 0]
    map_y = grid_y + flow[..., 1]
    return cv2.remap(mask.astype(np.float32), map_x, map_y, cv2.INTER_LINEAR,
                     borderMode=cv2.BORDER_CONSTANT, borderValue=0.0)


def export_track_logits(frames_dir, proposals_path, cfg: AdapterConfig,
                        selected_ids: list[int] | None = None) -> list[Path]:
    """Write one ".ftc" per frame (labels = object IDs, rows = H*W logits)."""
    require_builtin(cfg.tracker, "tracker")
    paths = _frame_paths(frames_dir)
    proposals = json.loads(Path(proposals_path).read_text(encoding="utf-8"))
    if selected_ids is not None:
        wanted = set(selected_ids)
        proposals = [p for p in proposals if p["id"] in wanted]
    if not proposals:
        raise AdapterError("no proposals selected for tracking")

    base = Path(proposals_path).parent
    masks = {}
    for p in proposals:
        soft = read_mask_png16(base / p["mask"])
        masks[int(p["id"])] = soft > 0.5

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lost: dict[int, int] = {}
    written = []
    prev_gray = None
    for index, frame_path in enumerate(paths):
        gray = cv2.cvtColor((load_frame_rgb(frame_path) * 255).astype(np.uint8), cv2.COLOR_RGB2GRAY)
        if index > 0:
            # backward flow (current -> previous) drives the pull-warp
            flow = cv2.calcOpticalFlowFarneback(gray, prev_gray, None,
                                                0.5, 3, 15, 3, 5, 1.2, 0)
            advanced = {}
            for oid, mask in masks.items():
                warped = warp_mask(mask.astype(np.float64), flow) > 0.5
                if not warped.any():
                    lost.setdefault(oid, index)  # tracking failure: drop the id from here on
                    continue
                advanced[oid] = warped
            masks = advanced
        prev_gray = gray

        ids = sorted(masks)
        rows = np.stack([signed_distance_logits(masks[oid]).ravel() for oid in ids]) if ids else np.zeros((0, gray.size), np.float32)
        out_path = out_dir / f"{frame_path.stem}.ftc"
        write_ftc(out_path, rows.astype(np.float32), [str(oid) for oid in ids])
        written.append(out_path)

    if lost:
        report = {str(oid): frame for oid, frame in sorted(lost.items())}
        (out_dir / "lost_tracks.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return written
