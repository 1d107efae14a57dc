"""Writers for splatlab's on-disk formats, implemented standalone.

Keeping the serialization independent of the main package is the point:
these few lines are the portability proof for the wire formats (proposal
JSON, ".ftc" tensor containers, 16-bit mask PNGs).
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import cv2
import numpy as np


def write_ftc(path, vectors: np.ndarray, labels: list[str]) -> None:
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    header = json.dumps(
        {"count": int(vectors.shape[0]), "dim": int(vectors.shape[1]), "labels": list(labels)},
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(b"FTC1")
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(vectors.tobytes())


def write_proposals_json(path, proposals: list[dict]) -> None:
    Path(path).write_text(json.dumps(proposals, indent=2) + "\n", encoding="utf-8")


def write_mask_png16(path, soft_mask: np.ndarray) -> None:
    """Soft mask in [0, 1] stored as 16-bit grayscale PNG."""
    image = np.rint(np.clip(soft_mask, 0.0, 1.0) * 65535.0).astype(np.uint16)
    if not cv2.imwrite(str(path), image):
        raise OSError(f"failed to write mask PNG {path}")


def read_mask_png16(path) -> np.ndarray:
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FileNotFoundError(f"cannot read mask PNG {path}")
    return raw.astype(np.float64) / 65535.0
