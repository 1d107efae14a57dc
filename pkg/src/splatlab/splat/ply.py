"""Binary little-endian PLY interop for Gaussian scenes.

One vertex per primitive with the ecosystem property layout: x, y, z,
nx/ny/nz (zeros), f_dc_0..2, f_rest_* (channel-major), opacity stored as a
logit, scale_0..2 stored as logs, rot_0..3, plus an integer source_view tag.
Foreign files lacking source_view load with tag 0; files missing any required
property are rejected.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.special import expit, logit

from ..errors import SchemaError
from .scene import GaussianPrimitive, GaussianScene

_REQUIRED = ("x", "y", "z", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
             "f_dc_0", "f_dc_1", "f_dc_2")
_PLY_TYPES = {"float": "<f4", "float32": "<f4", "int": "<i4", "int32": "<i4", "uchar": "u1", "uint8": "u1"}


def _rest_count(sh_degree: int) -> int:
    return (sh_degree + 1) ** 2 - 1


def save_ply(scene: GaussianScene, path) -> None:
    n = len(scene)
    rest = _rest_count(scene.sh_degree)
    names = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
    names += [f"f_rest_{i}" for i in range(3 * rest)]
    names += ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
    dtype = np.dtype([(name, "<f4") for name in names] + [("source_view", "<i4")])
    rows = np.zeros(n, dtype=dtype)
    with np.errstate(divide="ignore"):
        for i, g in enumerate(scene.primitives):
            r = rows[i]
            r["x"], r["y"], r["z"] = g.center
            r["f_dc_0"], r["f_dc_1"], r["f_dc_2"] = g.sh_coeffs[0]
            # channel-major rest block: all R coefficients, then G, then B
            flat_rest = g.sh_coeffs[1:].T.ravel()
            for j in range(3 * rest):
                r[f"f_rest_{j}"] = flat_rest[j]
            r["opacity"] = logit(g.opacity)
            r["scale_0"], r["scale_1"], r["scale_2"] = np.log(g.scale)
            r["rot_0"], r["rot_1"], r["rot_2"], r["rot_3"] = g.rotation
            r["source_view"] = g.source_view
    header_props = "".join(
        f"property {'int' if name == 'source_view' else 'float'} {name}\n" for name in names + ["source_view"]
    )
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {n}\n"
        f"{header_props}"
        "end_header\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(rows.tobytes())


def load_ply(path) -> GaussianScene:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such PLY file: {path}")
    raw = path.read_bytes()
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply\n") or end < 0:
        raise SchemaError(f"{path}: malformed PLY header")
    header_lines = raw[:end].decode("ascii", errors="replace").splitlines()
    body = raw[end + len(b"end_header\n"):]
    count = None
    fields = []
    for line in header_lines[1:]:
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if parts[1] != "binary_little_endian":
                raise SchemaError(f"{path}: unsupported PLY format {parts[1]!r}")
        elif parts[0] == "element":
            if parts[1] != "vertex":
                raise SchemaError(f"{path}: unsupported element {parts[1]!r}")
            count = int(parts[2])
        elif parts[0] == "property":
            if parts[1] not in _PLY_TYPES:
                raise SchemaError(f"{path}: unsupported property type {parts[1]!r}")
            fields.append((parts[2], _PLY_TYPES[parts[1]]))
    if count is None:
        raise SchemaError(f"{path}: header missing vertex element")
    names = [name for name, _ in fields]
    missing = [name for name in _REQUIRED if name not in names]
    if missing:
        raise SchemaError(f"{path}: missing required properties {missing}")
    dtype = np.dtype(fields)
    if len(body) < count * dtype.itemsize:
        raise SchemaError(f"{path}: payload shorter than {count} vertices")
    rows = np.frombuffer(body[: count * dtype.itemsize], dtype=dtype)

    rest_names = sorted(
        (name for name in names if name.startswith("f_rest_")),
        key=lambda s: int(s.rsplit("_", 1)[1]),
    )
    if len(rest_names) % 3 != 0:
        raise SchemaError(f"{path}: f_rest_* count {len(rest_names)} is not a multiple of 3")
    rest = len(rest_names) // 3
    degree = int(round(np.sqrt(rest + 1))) - 1
    if (degree + 1) ** 2 - 1 != rest:
        raise SchemaError(f"{path}: f_rest_* count {len(rest_names)} does not match any SH degree")

    prims = []
    for r in rows:
        dc = np.array([r["f_dc_0"], r["f_dc_1"], r["f_dc_2"]], dtype=np.float64)
        if rest:
            flat = np.array([r[name] for name in rest_names], dtype=np.float64)
            coeffs = np.vstack([dc, flat.reshape(3, rest).T])
        else:
            coeffs = dc.reshape(1, 3)
        quat = np.array([r["rot_0"], r["rot_1"], r["rot_2"], r["rot_3"]], dtype=np.float64)
        quat = quat / np.linalg.norm(quat)
        prims.append(
            GaussianPrimitive(
                center=np.array([r["x"], r["y"], r["z"]], dtype=np.float64),
                rotation=quat,
                scale=np.exp(np.array([r["scale_0"], r["scale_1"], r["scale_2"]], dtype=np.float64)),
                opacity=float(expit(r["opacity"])),
                sh_coeffs=coeffs,
                source_view=int(r["source_view"]) if "source_view" in names else 0,
            )
        )
    return GaussianScene(tuple(prims), sh_degree=degree)
