"""Shared domain types and bit-exact file formats.

Images are float RGB in [0, 1] (sRGB as given); all color math in this
code base operates in that space. Feature vectors travel in the ".ftc"
tensor container: magic ``FTC1``, a little-endian u32 header length, a
UTF-8 JSON header ``{"count": N, "dim": D, "labels": [...]}``, then
N x D little-endian float32 payload.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import cv2
import numpy as np

from .errors import ImageFormatError, SchemaError, ValidationError

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_FTC_MAGIC = b"FTC1"


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """RGB image, row-major (height, width, 3) float64 values in [0, 1]."""

    data: np.ndarray
    color_space: str = "srgb"

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValidationError(f"image data must be (H, W, 3), got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValidationError("image data contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValidationError("image data outside [0, 1]")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return 3


@dataclass(frozen=True)
class IntrinsicsSpec:
    """Pinhole intrinsics in pixel units."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError("focal lengths must be positive")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise ValidationError("principal point outside image bounds")


@dataclass(frozen=True, eq=False)
class CameraPose:
    """World-to-camera rigid transform: unit quaternion (w, x, y, z) + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            raise ValidationError("quaternion is not unit length within 1e-6")
        q.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    def rotation_matrix(self) -> np.ndarray:
        w, x, y, z = self.rotation
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    @staticmethod
    def identity() -> "CameraPose":
        return CameraPose(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """Stack of per-item embedding vectors with string labels."""

    vectors: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        arr = np.asarray(self.vectors, dtype=np.float32)
        if arr.ndim != 2:
            raise ValidationError(f"feature vectors must be 2-D, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValidationError("feature vectors contain non-finite values")
        labels = tuple(str(x) for x in self.labels)
        if not labels:
            labels = tuple(str(i) for i in range(arr.shape[0]))
        if len(labels) != arr.shape[0]:
            raise ValidationError("label count does not match vector count")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "vectors", arr)
        object.__setattr__(self, "labels", labels)

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def load_image(path) -> ImageBuffer:
    """Load an 8- or 16-bit RGB(A) PNG; integer samples map linearly to [0, 1]."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image file: {path}")
    raw = path.read_bytes()
    if not raw.startswith(_PNG_SIGNATURE):
        raise ImageFormatError(f"not a PNG file: {path}")
    arr = cv2.imdecode(np.frombuffer(raw, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise ImageFormatError(f"PNG decode failed (truncated or corrupt): {path}")
    if arr.dtype == np.uint8:
        scale = 255.0
    elif arr.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ImageFormatError(f"unsupported bit depth {arr.dtype} in {path}")
    if arr.ndim != 3 or arr.shape[2] not in (3, 4):
        raise ImageFormatError(f"unsupported channel layout {arr.shape} in {path} (need RGB or RGBA)")
    rgb = arr[:, :, 2::-1]  # BGR(A) -> RGB, alpha discarded
    return ImageBuffer(rgb.astype(np.float64) / scale)


def save_image(img: ImageBuffer, path) -> None:
    """Write an 8-bit RGB PNG; value v is stored as round(v * 255)."""
    path = Path(path)
    quantized = np.rint(img.data * 255.0).astype(np.uint8)
    ok, buf = cv2.imencode(".png", quantized[:, :, ::-1])
    if not ok:
        raise ImageFormatError(f"PNG encode failed for {path}")
    path.write_bytes(buf.tobytes())


def save_feature_set(fs: FeatureSet, path) -> None:
    header = json.dumps(
        {"count": fs.count, "dim": fs.dim, "labels": list(fs.labels)},
        separators=(",", ":"),
    ).encode("utf-8")
    payload = np.ascontiguousarray(fs.vectors, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_FTC_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(payload)


def load_feature_set(path) -> FeatureSet:
    """Load a ".ftc" tensor container; rejects size mismatches and non-finite data."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such feature container: {path}")
    raw = path.read_bytes()
    if len(raw) < 8 or raw[:4] != _FTC_MAGIC:
        raise SchemaError(f"bad magic in {path}: expected FTC1")
    (header_len,) = struct.unpack("<I", raw[4:8])
    if len(raw) < 8 + header_len:
        raise SchemaError(f"truncated header in {path}")
    try:
        header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
        count, dim = int(header["count"]), int(header["dim"])
        labels = [str(x) for x in header.get("labels", [])]
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise SchemaError(f"malformed header in {path}: {exc}") from exc
    payload = raw[8 + header_len :]
    expected = count * dim * 4
    if len(payload) != expected:
        raise SchemaError(
            f"payload size mismatch in {path}: header declares {expected} bytes, found {len(payload)}"
        )
    vectors = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
    if not np.isfinite(vectors).all():
        raise ValidationError(f"non-finite values in feature container {path}")
    if labels and len(labels) != count:
        raise SchemaError(f"label count mismatch in {path}")
    return FeatureSet(vectors.copy(), tuple(labels))


def unit_normalized(vectors: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    """L2-normalize rows; zero rows are rejected."""
    arr = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(arr, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValidationError("cannot normalize a zero vector")
    return arr / norms
