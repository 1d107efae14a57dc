"""Deterministic proposal filtering, ID assignment, and frame acceptance.

Operates purely on ingested segmenter outputs: first-frame region proposals
(JSON) and per-frame, per-object mask logits (".ftc", one file per frame,
labels = object IDs). No segmentation model runs here.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from .core import load_feature_set
from .errors import SchemaError, ValidationError


@dataclass(frozen=True)
class FilterConfig:
    """Thresholds for the multi-criterion proposal filter. All bounds inclusive."""

    a_min: int = 400
    s_min: float = 0.92
    q_min: float = 0.7
    r_min: float = 0.1
    r_max: float = 10.0
    m_edge: int = 10
    n_max: int = 20

    def __post_init__(self):
        if not (0 < self.r_min < self.r_max):
            raise ValidationError("aspect-ratio bounds must satisfy 0 < r_min < r_max")
        if self.a_min < 1:
            raise ValidationError("a_min must be >= 1")
        if self.n_max < 1:
            raise ValidationError("n_max must be >= 1")


@dataclass(frozen=True)
class RegionProposal:
    """First-frame object proposal with quality scores and a pixel bbox (x, y, w, h)."""

    proposal_id: int
    area: int
    stability: float
    predicted_iou: float
    bbox: tuple[int, int, int, int]
    soft_mask_path: str | None = None

    def __post_init__(self):
        x, y, w, h = self.bbox
        if w <= 0 or h <= 0:
            raise ValidationError(f"proposal {self.proposal_id}: bbox must have w > 0 and h > 0")
        if not (0.0 <= self.stability <= 1.0 and 0.0 <= self.predicted_iou <= 1.0):
            raise ValidationError(f"proposal {self.proposal_id}: scores must lie in [0, 1]")

    @property
    def aspect_ratio(self) -> float:
        _, _, w, h = self.bbox
        return w / h


@dataclass(frozen=True, eq=False)
class TrackedMaskSet:
    """Per-frame soft masks keyed by persistent object ID."""

    frame_index: int
    object_ids: frozenset[int]
    masks: Mapping[int, np.ndarray] = field(default_factory=dict)
    accepted: bool = True

    def __post_init__(self):
        ids = frozenset(int(i) for i in self.object_ids)
        masks = dict(self.masks)
        if set(masks) != set(ids):
            raise ValidationError(
                f"frame {self.frame_index}: masks keyed {sorted(masks)} but object_ids are {sorted(ids)}"
            )
        for oid, m in masks.items():
            m = np.asarray(m, dtype=np.float64)
            if m.ndim != 2:
                raise ValidationError(f"frame {self.frame_index}, object {oid}: mask must be 2-D")
            if not np.isfinite(m).all() or m.min() < 0.0 or m.max() > 1.0:
                raise ValidationError(f"frame {self.frame_index}, object {oid}: mask values outside [0, 1]")
            m.setflags(write=False)
            masks[oid] = m
        object.__setattr__(self, "object_ids", ids)
        object.__setattr__(self, "masks", masks)


def _edge_margin(bbox: tuple[int, int, int, int], image_size: tuple[int, int]) -> int:
    x, y, w, h = bbox
    img_w, img_h = image_size
    return min(x, y, img_w - (x + w), img_h - (y + h))


def filter_proposals(
    proposals: Sequence[RegionProposal],
    image_size: tuple[int, int],
    cfg: FilterConfig = FilterConfig(),
) -> list[RegionProposal]:
    """Apply the five-criterion filter, sort survivors by area, and reassign IDs.

    Keeps a proposal iff area >= a_min, stability >= s_min, predicted IoU >= q_min,
    w/h within [r_min, r_max], and the bbox keeps at least m_edge pixels of margin
    to every image edge. Survivors are sorted by descending area (ties broken by
    ascending original proposal_id), truncated to n_max, and renumbered 0..k-1.
    """
    img_w, img_h = image_size
    for p in proposals:
        x, y, w, h = p.bbox
        if x < 0 or y < 0 or x + w > img_w or y + h > img_h:
            raise ValidationError(f"proposal {p.proposal_id}: bbox {p.bbox} outside image {image_size}")
    kept = [
        p
        for p in proposals
        if p.area >= cfg.a_min
        and p.stability >= cfg.s_min
        and p.predicted_iou >= cfg.q_min
        and cfg.r_min <= p.aspect_ratio <= cfg.r_max
        and _edge_margin(p.bbox, image_size) >= cfg.m_edge
    ]
    kept.sort(key=lambda p: (-p.area, p.proposal_id))
    kept = kept[: cfg.n_max]
    return [replace(p, proposal_id=i) for i, p in enumerate(kept)]


def binarize_logits(logits: np.ndarray) -> np.ndarray:
    """Foreground iff logit > 0; zero maps to background."""
    arr = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ValidationError("logit grid contains non-finite values")
    return arr > 0.0


def soft_mask_from_logits(logits: np.ndarray) -> np.ndarray:
    """Logistic sigmoid of the logits; used as the blend weight."""
    arr = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ValidationError("logit grid contains non-finite values")
    return expit(arr)


def overlap_ratio(a: Iterable[int], b: Iterable[int]) -> float:
    """|a intersect b| / max(|a|, |b|); both-empty is defined as 1.0."""
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / max(len(sa), len(sb))


def accept_frames(frames: Sequence[TrackedMaskSet], threshold: float = 0.5) -> list[TrackedMaskSet]:
    """Sequential identity-drift scan against the most recently accepted frame.

    Frame 0 is always accepted. A later frame is accepted iff the overlap ratio
    of its ID set with the running reference is >= threshold (the exact boundary
    accepts); accepted frames become the new reference, skipped frames are
    flagged accepted=False and ignored by all later stages.
    """
    if not frames:
        raise ValidationError("accept_frames requires at least one frame")
    indices = [f.frame_index for f in frames]
    if indices != sorted(indices):
        raise ValidationError("frames must be ordered by frame_index")
    if not frames[0].object_ids:
        raise ValidationError("first frame has an empty object-ID set")
    out = [replace(frames[0], accepted=True)]
    reference = frames[0].object_ids
    for f in frames[1:]:
        if overlap_ratio(f.object_ids, reference) >= threshold:
            out.append(replace(f, accepted=True))
            reference = f.object_ids
        else:
            out.append(replace(f, accepted=False))
    return out


def load_proposals(path) -> list[RegionProposal]:
    """Read the proposal JSON schema: [{"id","area","stability","predicted_iou","bbox","mask"}]."""
    path = Path(path)
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed proposal JSON {path}: {exc.msg} at byte offset {exc.pos}") from exc
    if not isinstance(entries, list):
        raise SchemaError(f"{path}: top level must be a JSON array")
    out = []
    for i, e in enumerate(entries):
        try:
            out.append(
                RegionProposal(
                    proposal_id=int(e["id"]),
                    area=int(e["area"]),
                    stability=float(e["stability"]),
                    predicted_iou=float(e["predicted_iou"]),
                    bbox=tuple(int(v) for v in e["bbox"]),
                    soft_mask_path=e.get("mask"),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: bad proposal entry {i}: {exc}") from exc
    return out


def save_proposals(proposals: Sequence[RegionProposal], path) -> None:
    entries = [
        {
            "id": p.proposal_id,
            "area": p.area,
            "stability": p.stability,
            "predicted_iou": p.predicted_iou,
            "bbox": list(p.bbox),
            "mask": p.soft_mask_path,
        }
        for p in proposals
    ]
    Path(path).write_text(json.dumps(entries, indent=2) + "\n", encoding="utf-8")


def load_tracked_frame(path, image_size: tuple[int, int], frame_index: int) -> TrackedMaskSet:
    """Build a TrackedMaskSet from one per-frame logit container.

    Labels are object IDs; each row holds width x height logits. Soft masks are
    the sigmoid of the logits so binarize_logits(logits) == (soft mask > 0.5).
    """
    fs = load_feature_set(path)
    w, h = image_size
    if fs.dim != w * h:
        raise SchemaError(f"{path}: logit dim {fs.dim} does not match image size {w}x{h}")
    masks = {}
    for label, row in zip(fs.labels, fs.vectors):
        try:
            oid = int(label)
        except ValueError as exc:
            raise SchemaError(f"{path}: label {label!r} is not an integer object ID") from exc
        masks[oid] = soft_mask_from_logits(row.astype(np.float64).reshape(h, w))
    return TrackedMaskSet(frame_index=frame_index, object_ids=frozenset(masks), masks=masks)


def load_tracked_dir(directory, image_size: tuple[int, int]) -> list[TrackedMaskSet]:
    """Load every ``*.ftc`` in sorted filename order; position defines frame_index."""
    paths = sorted(Path(directory).glob("*.ftc"))
    if not paths:
        raise FileNotFoundError(f"no .ftc tracked-mask files in {directory}")
    return [load_tracked_frame(p, image_size, i) for i, p in enumerate(paths)]
