"""First-frame object proposal export.

The builtin backend segments the first frame with felzenszwalb graph
segmentation, measures each region, and emits proposals in the downstream
schema: id, area, stability (erode/dilate IoU of the binary mask), predicted
IoU stand-in (convex solidity), bbox, and a 16-bit soft-mask PNG (blurred
binary mask).
"""
from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np
from skimage.measure import regionprops
from skimage.segmentation import felzenszwalb

from .config import AdapterConfig, AdapterError, require_builtin
from .formats import write_mask_png16, write_proposals_json

_EDGE_KERNEL = np.ones((5, 5), np.uint8)


def _frame_paths(frames_dir) -> list[Path]:
    frames_dir = Path(frames_dir)
    if not frames_dir.is_dir():
        raise AdapterError(f"frames directory not readable: {frames_dir}")
    paths = sorted(frames_dir.glob("*.png"))
    if not paths:
        raise AdapterError(f"no PNG frames in {frames_dir}")
    return paths


def load_frame_rgb(path) -> np.ndarray:
    raw = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if raw is None:
        raise AdapterError(f"cannot decode frame {path}")
    return raw[:, :, ::-1].astype(np.float64) / 255.0


def _stability(mask: np.ndarray) -> float:
    """IoU between eroded and dilated versions; compact blobs score high."""
    m = mask.astype(np.uint8)
    eroded = cv2.erode(m, _EDGE_KERNEL)
    dilated = cv2.dilate(m, _EDGE_KERNEL)
    union = int(dilated.sum())
    return float(eroded.sum()) / union if union else 0.0


def segment_first_frame(image: np.ndarray, settings: dict) -> list[dict]:
    """Run the builtin segmenter and measure every region."""
    labels = felzenszwalb(
        image,
        scale=float(settings.get("scale", 100.0)),
        sigma=float(settings.get("sigma", 0.8)),
        min_size=int(settings.get("min_size", 30)),
    )
    proposals = []
    for prop in regionprops(labels + 1):
        mask = labels == (prop.label - 1)
        min_row, min_col, max_row, max_col = prop.bbox
        solidity = float(prop.solidity) if prop.solidity is not None else 0.0
        proposals.append(
            {
                "area": int(prop.area),
                "stability": round(_stability(mask), 6),
                "predicted_iou": round(min(solidity, 1.0), 6),
                "bbox": [int(min_col), int(min_row), int(max_col - min_col), int(max_row - min_row)],
                "_mask": mask,
            }
        )
    proposals.sort(key=lambda p: -p["area"])
    return proposals


def export_proposals(frames_dir, cfg: AdapterConfig) -> Path:
    """Segment the first frame and write proposals JSON plus soft-mask PNGs.

    Returns the proposals JSON path. An empty proposal set is a warning, not
    an error: the JSON is written as a valid empty array.
    """
    require_builtin(cfg.segmenter, "segmenter")
    first = _frame_paths(frames_dir)[0]
    image = load_frame_rgb(first)
    out_dir = Path(cfg.output_dir)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)

    rows = []
    for i, p in enumerate(segment_first_frame(image, cfg.generator_settings)):
        mask = p.pop("_mask")
        soft = cv2.GaussianBlur(mask.astype(np.float64), (5, 5), 1.0)
        mask_rel = f"masks/proposal_{i:03d}.png"
        write_mask_png16(out_dir / mask_rel, soft)
        rows.append({"id": i, **p, "mask": mask_rel})
    out_path = out_dir / "proposals.json"
    write_proposals_json(out_path, rows)
    return out_path
