"""Adapter configuration and provenance.

Model identifiers select a backend. ``builtin:*`` backends are deterministic
classical implementations that run offline; any other identifier is treated
as a hosted model name and fails with a clear load error when its runtime or
weights are unavailable. Upstream generator settings are recorded verbatim
into provenance, never re-decided here.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class AdapterError(Exception):
    pass


class ModelLoadError(AdapterError):
    """The requested model backend could not be loaded."""


BUILTIN_SEGMENTER = "builtin:felzenszwalb"
BUILTIN_TRACKER = "builtin:farneback-flow"
BUILTIN_IMAGE_EMBEDDER = "builtin:projection-v1"
BUILTIN_TEXT_EMBEDDER = "builtin:trigram-hash-v1"


@dataclass
class AdapterConfig:
    segmenter: str = BUILTIN_SEGMENTER
    tracker: str = BUILTIN_TRACKER
    image_embedder: str = BUILTIN_IMAGE_EMBEDDER
    text_embedder: str = BUILTIN_TEXT_EMBEDDER
    device: str = "cpu"
    output_dir: str = "."
    embedding_dim: int = 64
    generator_settings: dict = field(default_factory=dict)  # recorded verbatim

    def provenance(self, command: str, **extra) -> dict:
        return {
            "command": command,
            "models": {
                "segmenter": self.segmenter,
                "tracker": self.tracker,
                "image_embedder": self.image_embedder,
                "text_embedder": self.text_embedder,
            },
            "device": self.device,
            "generator_settings": dict(self.generator_settings),
            **extra,
        }


def write_provenance(cfg: AdapterConfig, command: str, out_dir, **extra) -> None:
    path = Path(out_dir) / f"{command}.provenance.json"
    path.write_text(json.dumps(cfg.provenance(command, **extra), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def require_builtin(model_id: str, kind: str) -> None:
    """Builtin backends run anywhere; anything else needs weights we cannot
    fetch in an offline install, so fail early and loudly."""
    if not model_id.startswith("builtin:"):
        raise ModelLoadError(
            f"cannot load {kind} model {model_id!r}: no model runtime/weights available "
            f"(use a builtin:* backend or install the model and extend the backend table)"
        )
