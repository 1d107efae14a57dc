"""Gaussian-splat scene types, CPU rasterizer, fusion, and PLY interop."""

from .ply import load_ply, save_ply
from .render import MAX_SH_DEGREE, RenderConfig, Splat2D, Z_NEAR, evaluate_sh, project_gaussian, rasterize
from .scene import GaussianPrimitive, GaussianScene, drop_view, fuse_scenes, quaternion_to_matrix

__all__ = [
    "GaussianPrimitive",
    "GaussianScene",
    "MAX_SH_DEGREE",
    "RenderConfig",
    "Splat2D",
    "Z_NEAR",
    "drop_view",
    "evaluate_sh",
    "fuse_scenes",
    "load_ply",
    "project_gaussian",
    "quaternion_to_matrix",
    "rasterize",
    "save_ply",
]
