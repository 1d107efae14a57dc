"""Image and prompt embedding export.

Builtin backends are deterministic and dependency-light: images embed as a
seeded random projection of a downsampled grayscale plus RGB histogram
signature; prompts embed as hashed character trigrams. Both are
unit-normalized at export so downstream cosine math is stable. Identifiers
that are not builtin fail with a model-load error rather than guessing.
"""
from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

from .config import AdapterConfig, AdapterError, require_builtin
from .formats import write_ftc
from .segment import load_frame_rgb

_PATCH = 16


def _projection_matrix(model_id: str, in_dim: int, out_dim: int) -> np.ndarray:
    # seeded from the identifier bytes, not Python's per-process hash
    seed = int.from_bytes(model_id.encode("utf-8")[:8].ljust(8, b"\0"), "little") % (2**32)
    gen = np.random.default_rng(seed)
    return gen.standard_normal((in_dim, out_dim)) / np.sqrt(in_dim)


def _image_signature(image: np.ndarray) -> np.ndarray:
    gray = image @ np.array([0.299, 0.587, 0.114])
    small = cv2.resize(gray, (_PATCH, _PATCH), interpolation=cv2.INTER_AREA).ravel()
    hist = np.concatenate([
        np.histogram(image[..., c], bins=16, range=(0.0, 1.0), density=True)[0] for c in range(3)
    ])
    return np.concatenate([small, hist * 0.1])


def embed_images(paths: list[Path], cfg: AdapterConfig) -> np.ndarray:
    require_builtin(cfg.image_embedder, "image embedder")
    signatures = np.stack([_image_signature(load_frame_rgb(p)) for p in paths])
    proj = _projection_matrix(cfg.image_embedder, signatures.shape[1], cfg.embedding_dim)
    vectors = signatures @ proj
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise AdapterError("degenerate image signature produced a zero embedding")
    return vectors / norms


def embed_prompts(prompts: list[str], cfg: AdapterConfig) -> np.ndarray:
    require_builtin(cfg.text_embedder, "text embedder")
    dim = cfg.embedding_dim
    out = np.zeros((len(prompts), dim))
    for i, prompt in enumerate(prompts):
        text = f"  {prompt.lower()}  "
        for j in range(len(text) - 2):
            trigram = text[j : j + 3].encode("utf-8")
            slot = int.from_bytes(trigram.ljust(4, b"\0"), "little")
            out[i, slot % dim] += 1.0 if (slot >> 7) % 2 == 0 else -1.0
        if not out[i].any():
            raise AdapterError(f"prompt {i} produced an empty embedding")
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def export_image_embeddings(images_dir, cfg: AdapterConfig, out_path) -> Path:
    paths = sorted(Path(images_dir).glob("*.png"))
    if not paths:
        raise AdapterError(f"no PNG images in {images_dir}")
    vectors = embed_images(paths, cfg)
    write_ftc(out_path, vectors.astype(np.float32), [p.name for p in paths])
    return Path(out_path)


def export_prompt_embeddings(prompts: list[str], labels: list[str], cfg: AdapterConfig, out_path) -> Path:
    vectors = embed_prompts(prompts, cfg)
    write_ftc(out_path, vectors.astype(np.float32), labels)
    return Path(out_path)
