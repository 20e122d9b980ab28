"""Volume files, synthetic datasets, and image/mesh writers.

The native container is NDVF, a little-endian binary layout::

    magic "NDVF" | u32 version=1 | u8 nAxes
    per axis: u32 extent | f64 spacing | f64 origin | u8 nameLen | name
    u8 dtype (0=f32, 1=f64) | u8 hasMask
    values (axis-0 fastest) | mask bytes (one per voxel, if hasMask)

The synthetic generators stand in for lattice QCD charge density and CT
attenuation scans.  They are pure functions of (dims, seed, params):
randomness comes from numpy's seeded PCG64 generator and all reductions
run in a fixed order, so outputs are bit-identical across runs and
platforms.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .field import ScalarField, make_field
from .geometry import TriangleMesh
from .render import Image

MAGIC = b"NDVF"
VERSION = 1
MAX_VOXELS = 2**28

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {"f32": 0, "f64": 1}


class FieldFileError(ValueError):
    """Malformed or unreadable NDVF content."""


class BadMagic(FieldFileError):
    pass


class Truncated(FieldFileError):
    pass


class UnknownDtype(FieldFileError):
    pass


def save_field(field: ScalarField, path: str, dtype: str = "f64") -> None:
    """Write a field as NDVF.  The mask block is omitted when all-true."""
    if dtype not in _DTYPE_CODES:
        raise UnknownDtype(f"dtype must be f32 or f64, got {dtype!r}")
    if field.voxel_count > MAX_VOXELS:
        raise FieldFileError(
            f"field has {field.voxel_count} voxels, over the {MAX_VOXELS} limit"
        )
    code = _DTYPE_CODES[dtype]
    has_mask = not bool(field.mask.all())
    parts = [MAGIC, struct.pack("<IB", VERSION, field.ndim)]
    for extent, spacing, origin, name in zip(
        field.dims, field.spacing, field.origin, field.axis_names
    ):
        raw = name.encode("utf-8")
        if len(raw) > 255:
            raise FieldFileError(f"axis name too long: {name!r}")
        parts.append(struct.pack("<IddB", extent, spacing, origin, len(raw)))
        parts.append(raw)
    parts.append(struct.pack("<BB", code, 1 if has_mask else 0))
    parts.append(field.values.astype(_DTYPES[code]).tobytes())
    if has_mask:
        parts.append(field.mask.astype(np.uint8).tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


class _Cursor:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.off = 0

    def take(self, n: int, what: str) -> bytes:
        end = self.off + n
        if end > len(self.buf):
            raise Truncated(
                f"truncated {what}: expected {n} bytes at offset {self.off}, "
                f"file has {len(self.buf) - self.off} left"
            )
        out = self.buf[self.off : end]
        self.off = end
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_field(path: str) -> ScalarField:
    """Read an NDVF file; fields without a mask block come back all-valid."""
    with open(path, "rb") as f:
        buf = f.read()
    cur = _Cursor(buf)
    magic = cur.take(4, "magic")
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}, expected {MAGIC!r}")
    version, n_axes = cur.unpack("<IB", "version header")
    if version != VERSION:
        raise FieldFileError(f"unsupported version {version}")
    if not 1 <= n_axes <= 4:
        raise FieldFileError(f"axis count {n_axes} outside 1..4")
    dims, spacing, origin, names = [], [], [], []
    for i in range(n_axes):
        extent, spc, org, name_len = cur.unpack("<IddB", f"axis {i} header")
        names.append(cur.take(name_len, f"axis {i} name").decode("utf-8"))
        dims.append(extent)
        spacing.append(spc)
        origin.append(org)
    n = 1
    for d in dims:
        n *= d
    if n > MAX_VOXELS:
        raise FieldFileError(f"file declares {n} voxels, over the {MAX_VOXELS} limit")
    code, has_mask = cur.unpack("<BB", "dtype header")
    if code not in _DTYPES:
        raise UnknownDtype(f"unknown dtype code {code}")
    item = _DTYPES[code]
    values = np.frombuffer(cur.take(n * item.itemsize, "values"), dtype=item)
    if has_mask:
        mask = np.frombuffer(cur.take(n, "mask"), dtype=np.uint8).astype(bool)
    else:
        mask = np.ones(n, dtype=bool)
    return ScalarField(
        tuple(dims), tuple(spacing), tuple(origin),
        values.astype(np.float64), mask, tuple(names),
    )


def load_raw(
    path: str,
    dims,
    dtype: str = "f32",
    spacing=None,
    origin=None,
    order: str = "f",
) -> ScalarField:
    """Import a headerless raw volume (the common exchange lowest denominator).

    ``order`` 'f' means axis 0 varies fastest in the file (our layout),
    'c' the reverse.  Integer dtypes are widened to float unchanged.
    """
    kinds = {"f32": "<f4", "f64": "<f8", "u8": "u1", "u16": "<u2"}
    if dtype not in kinds:
        raise UnknownDtype(f"dtype must be one of {sorted(kinds)}, got {dtype!r}")
    if order not in ("f", "c"):
        raise ValueError(f"order must be 'f' or 'c', got {order!r}")
    dims = tuple(int(d) for d in dims)
    n = 1
    for d in dims:
        n *= d
    item = np.dtype(kinds[dtype])
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) != n * item.itemsize:
        raise Truncated(
            f"raw file is {len(buf)} bytes, expected {n * item.itemsize} "
            f"for dims {dims} of {dtype}"
        )
    values = np.frombuffer(buf, dtype=item).astype(np.float64)
    if order == "c":
        values = values.reshape(dims).flatten(order="F")
    return make_field(dims, values, spacing=spacing, origin=origin)


# --- synthetic datasets -------------------------------------------------------


def synth_qcd_lumps(dims, n_lumps: int = 12, seed: int = 0) -> ScalarField:
    """Sum of signed isotropic 4-D Gaussian lumps on an xyzt lattice.

    Stands in for topological charge density: alternating-sign blobs of a
    few lattice units' width.  Values are rescaled so the peak magnitude
    is exactly 0.01 (the scale itself is our choice), which makes an
    isolevel of 0.005 cut roughly half-height surfaces around the
    strongest lumps.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 4:
        raise ValueError(f"qcd lumps need 4 axes, got {len(dims)}")
    if n_lumps < 1:
        raise ValueError(f"need at least one lump, got {n_lumps}")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.0, np.asarray(dims, dtype=np.float64), size=(n_lumps, 4))
    widths = rng.uniform(1.0, 3.0, size=n_lumps)
    signs = np.where(rng.random(n_lumps) < 0.5, -1.0, 1.0)
    amplitudes = rng.uniform(0.5, 1.0, size=n_lumps)

    axes = [np.arange(d, dtype=np.float64) for d in dims]
    grids = np.meshgrid(*axes, indexing="ij")
    values = np.zeros(dims, dtype=np.float64)
    for k in range(n_lumps):  # fixed accumulation order
        r2 = np.zeros(dims, dtype=np.float64)
        for a in range(4):
            r2 += (grids[a] - centers[k, a]) ** 2
        values += signs[k] * amplitudes[k] * np.exp(-r2 / (2.0 * widths[k] ** 2))
    peak = np.abs(values).max()
    values *= 0.01 / peak
    return make_field(dims, values.flatten(order="F"))


def synth_meteorite_phantom(dims, seed: int = 0) -> ScalarField:
    """Attenuation phantom: air, a rocky ellipsoid, pores, and a dense core.

    Value bands are chosen around the thresholds the scan scenarios use:
    air in [0.0005, 0.0015], rock in [0.004, 0.011], core in
    [0.013, 0.019], so air < 0.0025 <= rock < 0.0125 <= core <= 0.02
    holds by construction.  The core ball sits off-center strictly inside
    the rock and is written after the pores, so it is never punctured.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise ValueError(f"meteorite phantom needs 3 axes, got {len(dims)}")
    d = np.asarray(dims, dtype=np.float64)
    rng = np.random.default_rng(seed)

    rock_center = d / 2.0 + rng.uniform(-0.02, 0.02, size=3) * d
    rock_semi = d * rng.uniform(0.32, 0.38, size=3)
    core_dir = rng.uniform(-1.0, 1.0, size=3)
    core_dir /= np.linalg.norm(core_dir)
    core_center = rock_center + core_dir * 0.12 * d.min()
    core_radius = 0.10 * d.min()

    n = int(np.prod(dims))
    u_air = rng.random(n).reshape(dims, order="F")
    u_rock = rng.random(n).reshape(dims, order="F")
    u_core = rng.random(n).reshape(dims, order="F")

    axes = [np.arange(dd, dtype=np.float64) for dd in dims]
    x, y, z = np.meshgrid(*axes, indexing="ij")
    air = 0.001 + (u_air - 0.5) * 0.001
    values = air.copy()

    e = ((x - rock_center[0]) / rock_semi[0]) ** 2
    e += ((y - rock_center[1]) / rock_semi[1]) ** 2
    e += ((z - rock_center[2]) / rock_semi[2]) ** 2
    rock = e <= 1.0
    values[rock] = (0.0075 + (u_rock - 0.5) * 0.007)[rock]

    n_pores = max(3, n // 20000)
    for _ in range(n_pores):
        pc = rock_center + rng.uniform(-0.22, 0.22, size=3) * d
        pr = rng.uniform(0.02, 0.05) * d.min()
        pore = (x - pc[0]) ** 2 + (y - pc[1]) ** 2 + (z - pc[2]) ** 2 <= pr**2
        values[pore & rock] = air[pore & rock]

    core = (x - core_center[0]) ** 2 + (y - core_center[1]) ** 2 + (
        z - core_center[2]
    ) ** 2 <= core_radius**2
    values[core] = (0.016 + (u_core - 0.5) * 0.006)[core]

    return make_field(dims, values.flatten(order="F"))


GENERATORS = ("qcdLumps", "meteoritePhantom")


def synthesize(name: str, params: dict) -> ScalarField:
    """Run a named generator with script-style parameters.

    qcdLumps takes dims (4 extents), seed, lumps; meteoritePhantom takes
    dims (3 extents) and seed.
    """
    params = dict(params)
    if name == "qcdLumps":
        dims = params.pop("dims", None)
        if dims is None:
            raise ValueError("qcdLumps needs dims=WxXxYxZ")
        field = synth_qcd_lumps(
            dims, n_lumps=int(params.pop("lumps", 12)), seed=int(params.pop("seed", 0))
        )
    elif name == "meteoritePhantom":
        dims = params.pop("dims", None)
        if dims is None:
            raise ValueError("meteoritePhantom needs dims=WxHxD")
        field = synth_meteorite_phantom(dims, seed=int(params.pop("seed", 0)))
    else:
        raise KeyError(f"unknown generator {name!r}; expected one of {GENERATORS}")
    if params:
        raise ValueError(f"unknown {name} parameters: {sorted(params)}")
    return field


# --- image and mesh writers ---------------------------------------------------


def write_image_ppm(image: Image, path: str) -> None:
    with open(path, "wb") as f:
        f.write(image.to_ppm_bytes())


def _png_chunk(tag: bytes, payload: bytes) -> bytes:
    body = tag + payload
    return struct.pack(">I", len(payload)) + body + struct.pack(">I", zlib.crc32(body))


def png_bytes(image: Image) -> bytes:
    """Minimal 8-bit RGBA PNG encoding (filter 0 scanlines, one IDAT)."""
    rgba = image.rgba_grid()
    h, w = rgba.shape[0], rgba.shape[1]
    raw = b"".join(b"\x00" + rgba[row].tobytes() for row in range(h))
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 6, 0, 0, 0)
    return (
        b"\x89PNG\r\n\x1a\n"
        + _png_chunk(b"IHDR", ihdr)
        + _png_chunk(b"IDAT", zlib.compress(raw, 9))
        + _png_chunk(b"IEND", b"")
    )


def write_image_png(image: Image, path: str) -> None:
    with open(path, "wb") as f:
        f.write(png_bytes(image))


def write_image(image: Image, path: str) -> None:
    """Write PPM or PNG depending on the file extension."""
    if path.lower().endswith(".png"):
        write_image_png(image, path)
    else:
        write_image_ppm(image, path)


def write_mesh_off(mesh: TriangleMesh, path: str) -> None:
    """OFF text: header, counts, vertex lines, then '3 i j k' face lines.

    Coordinates are printed with repr precision, so reading them back
    reproduces the doubles exactly.
    """
    lines = [f"OFF\n{mesh.vertex_count} {mesh.triangle_count} 0\n"]
    for vx, vy, vz in mesh.points():
        lines.append(f"{float(vx)!r} {float(vy)!r} {float(vz)!r}\n")
    for i, j, k in mesh.faces():
        lines.append(f"3 {int(i)} {int(j)} {int(k)}\n")
    with open(path, "w") as f:
        f.write("".join(lines))
