"""splatlab-adapter: optional exporter that turns segmentation and embedding
backend outputs into splatlab's proposal JSON, logit ".ftc", and embedding
".ftc" files."""

__version__ = "0.1.0"

from .config import AdapterConfig, AdapterError, ModelLoadError

__all__ = ["AdapterConfig", "AdapterError", "ModelLoadError", "__version__"]
