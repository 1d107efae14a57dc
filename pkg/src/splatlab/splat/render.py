"""Deterministic CPU rasterizer for Gaussian scenes.

Each Gaussian is projected to screen space with the first-order (Jacobian)
covariance mapping, splats are depth-sorted with a stable (depth, index)
key, and pixels composite front-to-back:

    C(x) = sum_i c_i a'_i T_i + T_final * background,
    a'_i = min(alpha_clamp, a_i * exp(-0.5 d^T cov2d^-1 d)),
    T_i  = prod_{j<i} (1 - a'_j).

Contributions with a'_i < 1/255 are skipped and a pixel stops accumulating
once T < transmittance_floor. Tiling is a pure execution strategy: a splat
is routed to every tile its conservative footprint touches, where the
footprint radius is chosen so that any excluded pixel would have fallen
under the 1/255 floor anyway. Output is therefore bit-identical for every
tile size and thread count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..core import CameraPose, ImageBuffer, IntrinsicsSpec
from ..errors import ValidationError
from .scene import GaussianPrimitive, GaussianScene, quaternion_to_matrix

Z_NEAR = 0.01
_MIN_CONTRIBUTION = 1.0 / 255.0

# real SH basis constants (degree 0..3)
_SH_C0 = 0.28209479177387814
_SH_C1 = 0.4886025119029199
_SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792, 0.5462742152960396)
_SH_C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)
MAX_SH_DEGREE = 3


@dataclass(frozen=True)
class RenderConfig:
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    alpha_clamp: float = 0.99
    transmittance_floor: float = 1e-4
    dilation: float = 0.3  # 2D covariance low-pass addition, pixels^2
    tile_size: int = 16

    def __post_init__(self):
        if not 0.0 < self.alpha_clamp < 1.0:
            raise ValidationError("alpha_clamp must lie in (0, 1)")
        if self.transmittance_floor <= 0.0:
            raise ValidationError("transmittance_floor must be > 0")
        if self.dilation < 0.0:
            raise ValidationError("dilation must be >= 0")
        if self.tile_size < 1:
            raise ValidationError("tile_size must be >= 1")
        if any(not 0.0 <= c <= 1.0 for c in self.background):
            raise ValidationError("background must lie in [0, 1]^3")


@dataclass(frozen=True, eq=False)
class Splat2D:
    mean: np.ndarray  # pixel coordinates
    cov2d: np.ndarray  # 2x2 SPD (dilated)
    depth: float


def project_gaussian(
    g: GaussianPrimitive,
    pose: CameraPose,
    k: IntrinsicsSpec,
    cfg: RenderConfig = RenderConfig(),
) -> Splat2D | None:
    """EWA projection of one Gaussian; returns None when culled behind z_near."""
    w = pose.rotation_matrix()
    t = w @ g.center + pose.translation
    if t[2] <= Z_NEAR:
        return None
    tz = t[2]
    mean = np.array([k.fx * t[0] / tz + k.cx, k.fy * t[1] / tz + k.cy])
    jac = np.array(
        [
            [k.fx / tz, 0.0, -k.fx * t[0] / (tz * tz)],
            [0.0, k.fy / tz, -k.fy * t[1] / (tz * tz)],
        ]
    )
    jw = jac @ w
    cov2d = jw @ g.covariance() @ jw.T + cfg.dilation * np.eye(2)
    return Splat2D(mean=mean, cov2d=cov2d, depth=float(tz))


def evaluate_sh(coeffs: np.ndarray, view_dir: np.ndarray, degree: int) -> np.ndarray:
    """Shade one Gaussian: real SH basis up to `degree`, 0.5 offset on the DC
    term, result clamped to [0, 1]."""
    c = np.asarray(coeffs, dtype=np.float64)
    d = np.asarray(view_dir, dtype=np.float64).reshape(3)
    if abs(np.linalg.norm(d) - 1.0) > 1e-6:
        raise ValidationError("view_dir must be unit length within 1e-6")
    if not 0 <= degree <= MAX_SH_DEGREE:
        raise ValidationError(f"SH degree must lie in [0, {MAX_SH_DEGREE}]")
    if c.shape != ((degree + 1) ** 2, 3):
        raise ValidationError(f"expected {(degree + 1) ** 2} SH coefficients per channel, got shape {c.shape}")
    x, y, z = d
    rgb = 0.5 + _SH_C0 * c[0]
    if degree >= 1:
        rgb = rgb - _SH_C1 * y * c[1] + _SH_C1 * z * c[2] - _SH_C1 * x * c[3]
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        xy, yz, xz = x * y, y * z, x * z
        rgb = (
            rgb
            + _SH_C2[0] * xy * c[4]
            + _SH_C2[1] * yz * c[5]
            + _SH_C2[2] * (2.0 * zz - xx - yy) * c[6]
            + _SH_C2[3] * xz * c[7]
            + _SH_C2[4] * (xx - yy) * c[8]
        )
    if degree >= 3:
        rgb = (
            rgb
            + _SH_C3[0] * y * (3.0 * xx - yy) * c[9]
            + _SH_C3[1] * xy * z * c[10]
            + _SH_C3[2] * y * (4.0 * zz - xx - yy) * c[11]
            + _SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * c[12]
            + _SH_C3[4] * x * (4.0 * zz - xx - yy) * c[13]
            + _SH_C3[5] * z * (xx - yy) * c[14]
            + _SH_C3[6] * x * (xx - 3.0 * yy) * c[15]
        )
    return np.clip(rgb, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class _PreparedSplat:
    mean_x: float
    mean_y: float
    conic: tuple[float, float, float]  # inverse covariance (a, b, c)
    opacity: float
    color: np.ndarray
    radius: float


def _prepare_splats(scene: GaussianScene, pose: CameraPose, k: IntrinsicsSpec, cfg: RenderConfig):
    """Project, cull, color, and depth-sort the scene into composite order."""
    cam_center = -pose.rotation_matrix().T @ pose.translation
    rows = []
    for index, g in enumerate(scene.primitives):
        splat = project_gaussian(g, pose, k, cfg)
        if splat is None:
            continue
        det = float(np.linalg.det(splat.cov2d))
        if det <= 1e-12:
            continue  # singular footprint: skip, per contract
        if g.opacity * 255.0 < 1.0:
            continue  # can never reach the contribution floor
        a, b, c = splat.cov2d[0, 0], splat.cov2d[0, 1], splat.cov2d[1, 1]
        conic = (c / det, -b / det, a / det)
        mid = 0.5 * (a + c)
        lam_max = mid + math.sqrt(max(mid * mid - det, 0.0))
        # largest quadratic-form value at which alpha could still reach 1/255
        q_max = 2.0 * math.log(g.opacity * 255.0)
        radius = math.sqrt(q_max * lam_max) + 1e-6
        view_dir = g.center - cam_center
        norm = np.linalg.norm(view_dir)
        view_dir = view_dir / norm if norm > 0 else np.array([0.0, 0.0, 1.0])
        color = evaluate_sh(g.sh_coeffs, view_dir, scene.sh_degree)
        rows.append((splat.depth, index, _PreparedSplat(splat.mean[0], splat.mean[1], conic, g.opacity, color, radius)))
    rows.sort(key=lambda r: (r[0], r[1]))
    return [r[2] for r in rows]


def _composite_tile(
    splats: list[_PreparedSplat],
    x0: int,
    x1: int,
    y0: int,
    y1: int,
    cfg: RenderConfig,
) -> np.ndarray:
    """Front-to-back composite of one pixel tile; vectorized across pixels,
    sequential across splats so the per-pixel order is globally fixed."""
    xs, ys = np.meshgrid(np.arange(x0, x1, dtype=np.float64), np.arange(y0, y1, dtype=np.float64))
    xs, ys = xs.ravel(), ys.ravel()
    n = xs.size
    trans = np.ones(n)
    out = np.zeros((n, 3))
    floor = cfg.transmittance_floor
    for s in splats:
        if s.mean_x + s.radius < x0 or s.mean_x - s.radius > x1 - 1:
            continue
        if s.mean_y + s.radius < y0 or s.mean_y - s.radius > y1 - 1:
            continue
        active = trans >= floor
        if not active.any():
            break
        dx = xs - s.mean_x
        dy = ys - s.mean_y
        ca, cb, cc = s.conic
        q = np.maximum(ca * dx * dx + 2.0 * cb * dx * dy + cc * dy * dy, 0.0)
        alpha = np.minimum(cfg.alpha_clamp, s.opacity * np.exp(-0.5 * q))
        applied = np.where(active & (alpha >= _MIN_CONTRIBUTION), alpha, 0.0)
        out += s.color[None, :] * (applied * trans)[:, None]
        trans = trans * (1.0 - applied)
    out += trans[:, None] * np.asarray(cfg.background, dtype=np.float64)[None, :]
    return out.reshape(y1 - y0, x1 - x0, 3)


def rasterize(
    scene: GaussianScene,
    pose: CameraPose,
    k: IntrinsicsSpec,
    cfg: RenderConfig = RenderConfig(),
    threads: int = 1,
) -> ImageBuffer:
    """Render the scene from one camera; pixel (row, col) samples (x=col, y=row)."""
    width, height = k.width, k.height
    splats = _prepare_splats(scene, pose, k, cfg)
    tiles = []
    for y0 in range(0, height, cfg.tile_size):
        for x0 in range(0, width, cfg.tile_size):
            tiles.append((x0, min(x0 + cfg.tile_size, width), y0, min(y0 + cfg.tile_size, height)))

    def run(tile):
        x0, x1, y0, y1 = tile
        return _composite_tile(splats, x0, x1, y0, y1, cfg)

    if threads <= 1 or len(tiles) <= 1:
        results = [run(t) for t in tiles]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, tiles))
    image = np.zeros((height, width, 3))
    for (x0, x1, y0, y1), block in zip(tiles, results):
        image[y0:y1, x0:x1] = block
    return ImageBuffer(np.clip(image, 0.0, 1.0))
