"""Independent reference implementations used to check the production paths.

Everything here is written directly from the defining formulas with plain
loops (or a different library algorithm), deliberately sharing no code with
the package.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.linalg


# ------------------------------------------------------------ proposal filter


def proposal_passes(p, image_size, cfg) -> bool:
    """Direct re-statement of the five filter criteria."""
    x, y, w, h = p.bbox
    img_w, img_h = image_size
    margin = min(x, y, img_w - (x + w), img_h - (y + h))
    return (
        p.area >= cfg.a_min
        and p.stability >= cfg.s_min
        and p.predicted_iou >= cfg.q_min
        and cfg.r_min <= w / h <= cfg.r_max
        and margin >= cfg.m_edge
    )


# ------------------------------------------------------------ rasterization


def _quat_to_mat(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * y * y - 2 * z * z, 2 * x * y - 2 * w * z, 2 * x * z + 2 * w * y],
            [2 * x * y + 2 * w * z, 1 - 2 * x * x - 2 * z * z, 2 * y * z - 2 * w * x],
            [2 * x * z - 2 * w * y, 2 * y * z + 2 * w * x, 1 - 2 * x * x - 2 * y * y],
        ]
    )


def _sh_color(coeffs, direction, degree):
    c0 = 0.28209479177387814
    c1 = 0.4886025119029199
    x, y, z = direction
    rgb = 0.5 + c0 * coeffs[0]
    if degree >= 1:
        rgb = rgb - c1 * y * coeffs[1] + c1 * z * coeffs[2] - c1 * x * coeffs[3]
    if degree >= 2:
        k2 = [1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792, 0.5462742152960396]
        xx, yy, zz, xy, yz, xz = x * x, y * y, z * z, x * y, y * z, x * z
        rgb = (
            rgb
            + k2[0] * xy * coeffs[4]
            + k2[1] * yz * coeffs[5]
            + k2[2] * (2 * zz - xx - yy) * coeffs[6]
            + k2[3] * xz * coeffs[7]
            + k2[4] * (xx - yy) * coeffs[8]
        )
    return np.clip(rgb, 0.0, 1.0)


def _project_all(scene, pose, k, dilation, z_near):
    """Project and depth-sort every splat straight from the formulas."""
    rot = _quat_to_mat(np.asarray(pose.rotation, dtype=float))
    trans = np.asarray(pose.translation, dtype=float)
    cam_center = -rot.T @ trans

    splats = []
    for index, g in enumerate(scene.primitives):
        mu = np.asarray(g.center, dtype=float)
        t = rot @ mu + trans
        if t[2] <= z_near:
            continue
        fx, fy, cx, cy = k.fx, k.fy, k.cx, k.cy
        mean = np.array([fx * t[0] / t[2] + cx, fy * t[1] / t[2] + cy])
        jac = np.array(
            [
                [fx / t[2], 0.0, -fx * t[0] / t[2] ** 2],
                [0.0, fy / t[2], -fy * t[1] / t[2] ** 2],
            ]
        )
        r3 = _quat_to_mat(np.asarray(g.rotation, dtype=float))
        cov3d = r3 @ np.diag(np.asarray(g.scale, dtype=float) ** 2) @ r3.T
        cov2d = jac @ rot @ cov3d @ rot.T @ jac.T + dilation * np.eye(2)
        det = cov2d[0, 0] * cov2d[1, 1] - cov2d[0, 1] * cov2d[1, 0]
        if det <= 1e-12:
            continue
        direction = mu - cam_center
        norm = np.linalg.norm(direction)
        direction = direction / norm if norm > 0 else np.array([0.0, 0.0, 1.0])
        color = _sh_color(np.asarray(g.sh_coeffs, dtype=float), direction, scene.sh_degree)
        inv = np.linalg.inv(cov2d)
        splats.append((float(t[2]), index, mean, inv, float(g.opacity), color))
    splats.sort(key=lambda s: (s[0], s[1]))
    return splats


def render_reference(scene, pose, k, background=(0.0, 0.0, 0.0), alpha_clamp=0.99,
                     dilation=0.3, z_near=0.01):
    """Per-pixel full-scene compositor: no tiles, no transmittance early stop.

    Applies the same per-splat math as the production renderer (EWA projection,
    alpha clamp, 1/255 contribution floor) but visits every splat at every
    pixel in (depth, index) order, with plain scalar loops.
    """
    splats = _project_all(scene, pose, k, dilation, z_near)
    height, width = k.height, k.width
    out = np.zeros((height, width, 3))
    bg = np.asarray(background, dtype=float)
    for py in range(height):
        for px in range(width):
            trans_acc = 1.0
            color_acc = np.zeros(3)
            for _, _, mean, inv, opacity, color in splats:
                d = np.array([px, py], dtype=float) - mean
                q = max(float(d @ inv @ d), 0.0)
                alpha = min(alpha_clamp, opacity * math.exp(-0.5 * q))
                if alpha < 1.0 / 255.0:
                    continue
                color_acc = color_acc + color * alpha * trans_acc
                trans_acc *= 1.0 - alpha
            out[py, px] = color_acc + trans_acc * bg
    return out


def render_reference_fast(scene, pose, k, background=(0.0, 0.0, 0.0), alpha_clamp=0.99,
                          dilation=0.3, z_near=0.01):
    """Same brute-force semantics as render_reference (every splat visits every
    pixel; no tiles, no early stop), vectorized across pixels per splat so the
    full acceptance sweep fits its runtime budget."""
    splats = _project_all(scene, pose, k, dilation, z_near)
    height, width = k.height, k.width
    ys, xs = np.mgrid[0:height, 0:width]
    xs = xs.ravel().astype(float)
    ys = ys.ravel().astype(float)
    trans_acc = np.ones(xs.size)
    out = np.zeros((xs.size, 3))
    for _, _, mean, inv, opacity, color in splats:
        dx = xs - mean[0]
        dy = ys - mean[1]
        q = np.maximum(inv[0, 0] * dx * dx + (inv[0, 1] + inv[1, 0]) * dx * dy + inv[1, 1] * dy * dy, 0.0)
        alpha = np.minimum(alpha_clamp, opacity * np.exp(-0.5 * q))
        applied = np.where(alpha >= 1.0 / 255.0, alpha, 0.0)
        out += color[None, :] * (applied * trans_acc)[:, None]
        trans_acc = trans_acc * (1.0 - applied)
    out += trans_acc[:, None] * np.asarray(background, dtype=float)[None, :]
    return out.reshape(height, width, 3)


# ------------------------------------------------------------ point-set losses


def chamfer_l1_reference(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    forward = [min(float(np.abs(p - q).sum()) for q in b) for p in a]
    backward = [min(float(np.abs(p - q).sum()) for p in a) for q in b]
    return float(np.mean(forward) + np.mean(backward))


def smooth_l1_reference(pred, ref, beta) -> float:
    pred = np.asarray(pred, dtype=float).ravel()
    ref = np.asarray(ref, dtype=float).ravel()
    total = 0.0
    for d in np.abs(pred - ref):
        total += 0.5 * d * d / beta if d < beta else d - 0.5 * beta
    return total / pred.size


# ------------------------------------------------------------ feature metrics


def fid_reference(x, y) -> float:
    """Fréchet distance via scipy's Schur-based matrix square root."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mu_x, mu_y = x.mean(axis=0), y.mean(axis=0)
    cov_x = np.atleast_2d(np.cov(x, rowvar=False))
    cov_y = np.atleast_2d(np.cov(y, rowvar=False))
    sqrt_prod, _ = scipy.linalg.sqrtm(cov_x @ cov_y, disp=False)
    diff = mu_x - mu_y
    return float(diff @ diff + np.trace(cov_x + cov_y - 2.0 * np.real(sqrt_prod)))


def kid_reference(x, y) -> float:
    """Unbiased MMD^2 with the cubic kernel, written as explicit loops."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x.shape[1]

    def kern(a, b):
        return (float(a @ b) / d + 1.0) ** 3

    m, n = len(x), len(y)
    sxx = sum(kern(x[i], x[j]) for i in range(m) for j in range(m) if i != j)
    syy = sum(kern(y[i], y[j]) for i in range(n) for j in range(n) if i != j)
    sxy = sum(kern(x[i], y[j]) for i in range(m) for j in range(n))
    return sxx / (m * (m - 1)) + syy / (n * (n - 1)) - 2.0 * sxy / (m * n)
