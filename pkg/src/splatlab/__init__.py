"""splatlab: deterministic tooling for multi-view consistent recoloring,
CPU Gaussian-splat rendering and fusion, training-loss algebra, and
scene-edit benchmarking."""

__version__ = "0.1.0"

from .core import CameraPose, FeatureSet, ImageBuffer, IntrinsicsSpec
from .errors import ImageFormatError, SchemaError, SplatlabError, ValidationError

__all__ = [
    "CameraPose",
    "FeatureSet",
    "ImageBuffer",
    "ImageFormatError",
    "IntrinsicsSpec",
    "SchemaError",
    "SplatlabError",
    "ValidationError",
    "__version__",
]
