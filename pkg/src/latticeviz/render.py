"""CPU rendering: volume ray casting, triangle rasterization, legends.

Everything is deterministic for fixed inputs.  Rays, sample positions, and
compositing order are fully pinned down, so repeated renders are bit
identical and image regressions are meaningful.

Volume sampling positions lie on a global ray-parameter grid,
``t_k = (k + 0.5) * step_length``, clipped to each ray's entry/exit span.
Anchoring samples to that grid (instead of to the entry point) makes the
rendered image independent of how much fully-masked padding surrounds the
data: padded samples contribute nothing and the shared samples coincide
exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import Histogram, ScalarField
from .geometry import TriangleMesh, field_bounds, trilinear_sample_many
from .mathutil import (
    RigidTransform,
    Vec3,
    quat_conj,
    quat_rotation_matrix,
    vcross,
    vnorm,
    vnormalize,
    vsub,
)
from .transfer import TransferFunction

# Largest composite image the tiler will produce.
MAX_COMPOSITE_WIDTH = 3840
MAX_COMPOSITE_HEIGHT = 2400

# Transmittance below which a ray stops marching: one byte quantum.
MIN_TRANSMITTANCE = 1.0 / 255.0

_NEAR_PLANE = 1e-6


@dataclass(frozen=True)
class Camera:
    position: Vec3
    focal_point: Vec3
    view_up: Vec3 = (0.0, 0.0, 1.0)
    vertical_fov_degrees: float = 30.0

    def __post_init__(self) -> None:
        if tuple(self.position) == tuple(self.focal_point):
            raise ValueError("camera position and focal point coincide")
        if not 0.0 < self.vertical_fov_degrees < 180.0:
            raise ValueError(
                f"vertical fov must lie in (0, 180), got {self.vertical_fov_degrees}"
            )
        forward = vnormalize(vsub(self.focal_point, self.position))
        if vnorm(vcross(forward, vnormalize(self.view_up))) <= 1e-12:
            raise ValueError("view up is parallel to the view direction")

    def basis(self) -> tuple[Vec3, Vec3, Vec3]:
        """Orthonormal (right, up, forward) screen basis.

        Forward points into the screen, so the triple satisfies
        right x forward = up (a viewer looking along +x with +z up has
        right = -y, matching what the eye sees).
        """
        forward = vnormalize(vsub(self.focal_point, self.position))
        right = vnormalize(vcross(forward, self.view_up))
        up = vcross(right, forward)
        return right, up, forward

    @property
    def distance(self) -> float:
        return vnorm(vsub(self.focal_point, self.position))


@dataclass(frozen=True)
class VolumeStyle:
    step_length: float = 0.25
    background: Vec3 = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if not self.step_length > 0.0:
            raise ValueError(f"step length must be positive, got {self.step_length}")
        if len(self.background) != 3 or any(
            not 0.0 <= c <= 1.0 for c in self.background
        ):
            raise ValueError("background rgb components must lie in [0, 1]")


@dataclass(eq=False)
class Image:
    """Flat rgba bytes, row-major from the top-left pixel."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image size must be >= 1x1, got {self.width}x{self.height}")
        self.pixels = np.ascontiguousarray(self.pixels, dtype=np.uint8).reshape(-1)
        want = 4 * self.width * self.height
        if self.pixels.size != want:
            raise ValueError(f"expected {want} rgba bytes, got {self.pixels.size}")

    def rgba_grid(self) -> np.ndarray:
        """(height, width, 4) uint8 view."""
        return self.pixels.reshape(self.height, self.width, 4)

    def rgb_grid(self) -> np.ndarray:
        return self.rgba_grid()[..., :3]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )

    def to_ppm_bytes(self) -> bytes:
        """Binary PPM; color is already composited, so alpha is dropped."""
        header = f"P6\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + self.rgb_grid().tobytes()


def image_from_float(rgb: np.ndarray, alpha=1.0) -> Image:
    """Quantize float [0,1] channels to an rgba byte image."""
    rgb = np.asarray(rgb, dtype=np.float64)
    h, w, _ = rgb.shape
    a = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (h, w))
    out = np.empty((h, w, 4), dtype=np.uint8)
    out[..., :3] = np.rint(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)
    out[..., 3] = np.rint(np.clip(a, 0.0, 1.0) * 255.0).astype(np.uint8)
    return Image(w, h, out.reshape(-1))


def camera_rays(cam: Camera, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Eye point and unit ray directions through every pixel center.

    Returns (origin (3,), directions (height, width, 3)).  Pixel (row 0,
    col 0) is the top-left; directions use a vertical field of view and
    square pixels.
    """
    right, up, forward = cam.basis()
    half_h = math.tan(math.radians(cam.vertical_fov_degrees) / 2.0)
    aspect = width / height
    xs = ((np.arange(width) + 0.5) / width * 2.0 - 1.0) * half_h * aspect
    ys = (1.0 - (np.arange(height) + 0.5) / height * 2.0) * half_h
    d = (
        np.asarray(forward)[None, None, :]
        + xs[None, :, None] * np.asarray(right)[None, None, :]
        + ys[:, None, None] * np.asarray(up)[None, None, :]
    )
    d /= np.linalg.norm(d, axis=2, keepdims=True)
    return np.asarray(cam.position, dtype=np.float64), d


def _ray_box_span(
    o: np.ndarray, d: np.ndarray, lo: np.ndarray, hi: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-ray [t_enter, t_exit] against an axis box; enter clamped to 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (lo[None, :] - o[None, :]) * inv
        t2 = (hi[None, :] - o[None, :]) * inv
    near = np.minimum(t1, t2)
    far = np.maximum(t1, t2)
    parallel = d == 0.0
    between = (o[None, :] >= lo[None, :]) & (o[None, :] <= hi[None, :])
    near = np.where(parallel, np.where(between, -np.inf, np.inf), near)
    far = np.where(parallel, np.where(between, np.inf, -np.inf), far)
    t_enter = np.maximum(near.max(axis=1), 0.0)
    t_exit = far.min(axis=1)
    return t_enter, t_exit


def raycast_float(
    field: ScalarField,
    tf: TransferFunction,
    cam: Camera,
    style: VolumeStyle,
    size: tuple[int, int],
    *,
    transform: RigidTransform | None = None,
    window: tuple[float, float] | None = None,
    depth: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Front-to-back emission-absorption compositing; float precision.

    Returns (rgb (h, w, 3) composited over the background, transmittance
    (h, w)).  Opacity from the transfer function is per unit length and is
    corrected for the step via ``a_s = 1 - (1 - a)**step_length``.  Masked
    samples contribute nothing.  ``window``, when given, zeroes opacity for
    scalars outside [lo, hi].  ``depth``, when given, is a camera-space
    z-buffer (h, w); samples at or beyond it are occluded.  ``transform``
    places the volume in the world; rays are pulled back into volume space,
    which preserves ray parameters, so depths stay comparable.
    """
    if field.ndim != 3:
        raise ValueError(f"volume rendering needs a 3-axis field, got {field.ndim}")
    width, height = size
    if width < 1 or height < 1:
        raise ValueError(f"image size must be >= 1x1, got {width}x{height}")

    origin, dirs = camera_rays(cam, width, height)
    d_world = dirs.reshape(-1, 3)
    n_rays = d_world.shape[0]

    if transform is not None:
        origin = np.asarray(transform.inverse_point(tuple(origin)))
        m = np.asarray(quat_rotation_matrix(quat_conj(transform.rotation)))
        d = d_world @ m.T
    else:
        d = d_world

    box = field_bounds(field)
    lo = np.asarray(box.min, dtype=np.float64)
    hi = np.asarray(box.max, dtype=np.float64)
    t_enter, t_exit = _ray_box_span(origin, d, lo, hi)

    step = style.step_length
    # First/last sample indices on the global t grid within the span.
    k_first = np.ceil(t_enter / step - 0.5)
    k_last = np.floor(t_exit / step - 0.5)
    if depth is not None:
        _, _, forward = cam.basis()
        cos_f = d_world @ np.asarray(forward)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_depth = depth.reshape(-1) / cos_f
        k_last = np.minimum(k_last, np.floor(t_depth / step - 0.5))

    color = np.zeros((n_rays, 3))
    transmittance = np.ones(n_rays)
    marching = (t_enter <= t_exit) & (k_first <= k_last)
    if np.any(marching):
        k_lo = int(k_first[marching].min())
        k_hi = int(k_last[marching].max())
        for k in range(k_lo, k_hi + 1):
            live = marching & (transmittance >= MIN_TRANSMITTANCE) & (k <= k_last)
            if not np.any(live):
                break
            active = live & (k >= k_first)
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                continue
            t_k = (k + 0.5) * step
            pts = origin[None, :] + t_k * d[idx]
            values, valid = trilinear_sample_many(field, pts)
            alpha = tf.opacity(values)
            if window is not None:
                in_window = (values >= window[0]) & (values <= window[1])
                alpha = np.where(in_window, alpha, 0.0)
            alpha = np.where(valid, alpha, 0.0)
            a_s = 1.0 - (1.0 - alpha) ** step
            rgb = tf.color(values)
            color[idx] += (transmittance[idx] * a_s)[:, None] * rgb
            transmittance[idx] *= 1.0 - a_s

    bg = np.asarray(style.background, dtype=np.float64)
    out = color + transmittance[:, None] * bg[None, :]
    return out.reshape(height, width, 3), transmittance.reshape(height, width)


def raycast(
    field: ScalarField,
    tf: TransferFunction,
    cam: Camera,
    style: VolumeStyle,
    size: tuple[int, int],
    *,
    transform: RigidTransform | None = None,
    window: tuple[float, float] | None = None,
    depth: np.ndarray | None = None,
) -> Image:
    """Byte-quantized volume rendering; alpha encodes accumulated opacity."""
    rgb, transmittance = raycast_float(
        field, tf, cam, style, size, transform=transform, window=window, depth=depth
    )
    return image_from_float(rgb, alpha=1.0 - transmittance)


@dataclass(eq=False)
class Raster:
    """Mutable float color + camera-space depth target for rasterization."""

    rgb: np.ndarray
    depth: np.ndarray

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]


def new_raster(size: tuple[int, int], background: Vec3 = (0.0, 0.0, 0.0)) -> Raster:
    width, height = size
    if width < 1 or height < 1:
        raise ValueError(f"raster size must be >= 1x1, got {width}x{height}")
    rgb = np.empty((height, width, 3), dtype=np.float64)
    rgb[:] = np.asarray(background, dtype=np.float64)
    depth = np.full((height, width), np.inf)
    return Raster(rgb, depth)


def draw_triangles(
    raster: Raster,
    cam: Camera,
    vertices: np.ndarray,
    triangles: np.ndarray,
    *,
    flat_color: Vec3 | None = None,
    vertex_colors: np.ndarray | None = None,
    shaded: bool = True,
) -> None:
    """Z-buffered perspective rasterization into ``raster``.

    With ``flat_color``, triangles are shaded per-face by a two-sided
    Lambert term from a headlight at the camera (plus a small ambient
    floor so silhouettes never vanish).  With ``vertex_colors`` (n, 3),
    colors are interpolated perspective-correctly and left unshaded.
    Triangles with any vertex at or behind the eye plane are skipped
    rather than clipped.
    """
    if (flat_color is None) == (vertex_colors is None):
        raise ValueError("pass exactly one of flat_color or vertex_colors")
    verts = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    tris = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if tris.size == 0:
        return

    height, width = raster.height, raster.width
    right, up, forward = cam.basis()
    basis = np.stack([np.asarray(right), np.asarray(up), np.asarray(forward)])
    cam_pos = np.asarray(cam.position, dtype=np.float64)
    vc = (verts - cam_pos[None, :]) @ basis.T
    half_h = math.tan(math.radians(cam.vertical_fov_degrees) / 2.0)
    aspect = width / height

    with np.errstate(divide="ignore", invalid="ignore"):
        ndc_x = vc[:, 0] / (vc[:, 2] * half_h * aspect)
        ndc_y = vc[:, 1] / (vc[:, 2] * half_h)
    px = (ndc_x + 1.0) / 2.0 * width - 0.5
    py = (1.0 - ndc_y) / 2.0 * height - 0.5
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_z = np.where(vc[:, 2] > _NEAR_PLANE, 1.0 / vc[:, 2], 0.0)

    if vertex_colors is not None:
        vcols = np.asarray(vertex_colors, dtype=np.float64).reshape(-1, 3)
        if vcols.shape[0] != verts.shape[0]:
            raise ValueError("vertex_colors must have one rgb row per vertex")

    for tri in tris:
        i0, i1, i2 = int(tri[0]), int(tri[1]), int(tri[2])
        if vc[i0, 2] <= _NEAR_PLANE or vc[i1, 2] <= _NEAR_PLANE or vc[i2, 2] <= _NEAR_PLANE:
            continue
        x0p, x1p, x2p = px[i0], px[i1], px[i2]
        y0p, y1p, y2p = py[i0], py[i1], py[i2]
        area = (x1p - x0p) * (y2p - y0p) - (y1p - y0p) * (x2p - x0p)
        if area == 0.0:
            continue

        cx0 = max(0, int(math.ceil(min(x0p, x1p, x2p))))
        cx1 = min(width - 1, int(math.floor(max(x0p, x1p, x2p))))
        cy0 = max(0, int(math.ceil(min(y0p, y1p, y2p))))
        cy1 = min(height - 1, int(math.floor(max(y0p, y1p, y2p))))
        if cx0 > cx1 or cy0 > cy1:
            continue

        xs = np.arange(cx0, cx1 + 1, dtype=np.float64)
        ys = np.arange(cy0, cy1 + 1, dtype=np.float64)
        gx, gy = np.meshgrid(xs, ys)
        l0 = ((y1p - y2p) * (gx - x2p) + (x2p - x1p) * (gy - y2p)) / area
        l1 = ((y2p - y0p) * (gx - x0p) + (x0p - x2p) * (gy - y0p)) / area
        l2 = 1.0 - l0 - l1
        inside = (l0 >= 0.0) & (l1 >= 0.0) & (l2 >= 0.0)
        if not inside.any():
            continue

        zi = l0 * inv_z[i0] + l1 * inv_z[i1] + l2 * inv_z[i2]
        with np.errstate(divide="ignore"):
            z = 1.0 / zi
        zbuf = raster.depth[cy0 : cy1 + 1, cx0 : cx1 + 1]
        update = inside & (z < zbuf)
        if not update.any():
            continue

        if flat_color is not None:
            e1 = verts[i1] - verts[i0]
            e2 = verts[i2] - verts[i0]
            normal = np.cross(e1, e2)
            nn = np.linalg.norm(normal)
            if nn == 0.0:
                continue
            centroid = (verts[i0] + verts[i1] + verts[i2]) / 3.0
            light = cam_pos - centroid
            ln = np.linalg.norm(light)
            lambert = abs(float(normal @ light)) / (nn * ln) if ln > 0.0 else 1.0
            if shaded:
                shade = 0.1 + 0.9 * lambert
            else:
                shade = 1.0
            face_rgb = np.clip(np.asarray(flat_color) * shade, 0.0, 1.0)
            raster.rgb[cy0 : cy1 + 1, cx0 : cx1 + 1][update] = face_rgb
        else:
            # Perspective-correct Gouraud: interpolate color/z, divide by 1/z.
            num = (
                (l0 * inv_z[i0])[..., None] * vcols[i0]
                + (l1 * inv_z[i1])[..., None] * vcols[i1]
                + (l2 * inv_z[i2])[..., None] * vcols[i2]
            )
            shaded_rgb = np.clip(num * z[..., None], 0.0, 1.0)
            raster.rgb[cy0 : cy1 + 1, cx0 : cx1 + 1][update] = shaded_rgb[update]
        zbuf[update] = z[update]


def rasterize_mesh(
    mesh: TriangleMesh,
    cam: Camera,
    size: tuple[int, int],
    color: Vec3 = (0.8, 0.8, 0.8),
    background: Vec3 = (0.0, 0.0, 0.0),
) -> tuple[Image, np.ndarray]:
    """Render one mesh; returns the image and the camera-space z-buffer."""
    raster = new_raster(size, background)
    draw_triangles(raster, cam, mesh.points(), mesh.faces(), flat_color=color)
    covered = np.isfinite(raster.depth).astype(np.float64)
    return image_from_float(raster.rgb, alpha=covered), raster.depth


# 3x5 pixel glyphs for legend labels, row-major bit strings.
_GLYPHS = {
    "0": ("111", "101", "101", "101", "111"),
    "1": ("010", "110", "010", "010", "111"),
    "2": ("111", "001", "111", "100", "111"),
    "3": ("111", "001", "111", "001", "111"),
    "4": ("101", "101", "111", "001", "001"),
    "5": ("111", "100", "111", "001", "111"),
    "6": ("111", "100", "111", "101", "111"),
    "7": ("111", "001", "001", "010", "010"),
    "8": ("111", "101", "111", "101", "111"),
    "9": ("111", "101", "111", "001", "111"),
    "-": ("000", "000", "111", "000", "000"),
    "+": ("000", "010", "111", "010", "000"),
    ".": ("000", "000", "000", "000", "010"),
    "e": ("000", "111", "111", "100", "111"),
    " ": ("000", "000", "000", "000", "000"),
}
GLYPH_WIDTH, GLYPH_HEIGHT = 3, 5


def text_width(text: str) -> int:
    if not text:
        return 0
    return len(text) * (GLYPH_WIDTH + 1) - 1


def draw_text(rgb: np.ndarray, x: int, y: int, text: str) -> None:
    """Stamp ``text`` into a float rgb grid by inverting covered pixels.

    Inversion keeps labels readable on any palette without choosing a text
    color.  Pixels falling outside the grid are clipped.
    """
    height, width = rgb.shape[:2]
    cx = x
    for ch in text:
        glyph = _GLYPHS.get(ch, _GLYPHS[" "])
        for gy, row in enumerate(glyph):
            for gx, bit in enumerate(row):
                if bit != "1":
                    continue
                ix, iy = cx + gx, y + gy
                if 0 <= ix < width and 0 <= iy < height:
                    rgb[iy, ix] = 1.0 - rgb[iy, ix]
        cx += GLYPH_WIDTH + 1


def format_tick(value: float) -> str:
    """Compact numeric label using only glyphs the bitmap font has."""
    return f"{value:g}"


def colorbar_image(tf: TransferFunction, size: tuple[int, int]) -> Image:
    """Horizontal gradient across the transfer function's scalar range.

    Column 0 is the range minimum, the last column the maximum; min/max
    tick labels are stamped near the left and right edges (never touching
    the outermost columns).
    """
    width, height = size
    if width < 8 or height < 8:
        raise ValueError(f"colorbar size must be >= 8x8, got {width}x{height}")
    lo, hi = tf.scalar_range
    scalars = lo + np.arange(width) / (width - 1) * (hi - lo)
    rgb = np.repeat(tf.color(scalars)[None, :, :], height, axis=0)

    y = max(1, (height - GLYPH_HEIGHT) // 2)
    lo_text = format_tick(lo)
    hi_text = format_tick(hi)
    draw_text(rgb, 2, y, lo_text)
    draw_text(rgb, max(2, width - 3 - text_width(hi_text)), y, hi_text)
    return image_from_float(rgb)


def histogram_image(hist: Histogram, size: tuple[int, int]) -> Image:
    """Bar chart with the tallest bin spanning the full image height."""
    width, height = size
    if width < 8 or height < 8:
        raise ValueError(f"histogram size must be >= 8x8, got {width}x{height}")
    counts = np.asarray(hist.counts, dtype=np.int64)
    n = counts.size
    rgb = np.full((height, width, 3), 0.06)
    top = counts.max() if n else 0
    if top > 0:
        for k in range(n):
            x0 = k * width // n
            x1 = (k + 1) * width // n
            bar_h = int(round(counts[k] / top * height))
            if bar_h > 0 and x1 > x0:
                rgb[height - bar_h :, x0:x1] = 0.9
    return image_from_float(rgb)


def composite_views(
    tiles: list[tuple[Image, tuple[int, int]]],
    layout: tuple[int, int],
    cell_size: tuple[int, int],
    background: Vec3 = (0.0, 0.0, 0.0),
) -> Image:
    """Place per-view tiles on a rows x cols grid of fixed-size cells.

    ``tiles`` pairs each image with its (row, col) cell; the tile's
    top-left corner lands at (col*cellW, row*cellH).  Unfilled cells keep
    the background.  The composite must not exceed 3840x2400.
    """
    rows, cols = layout
    cell_w, cell_h = cell_size
    if rows < 1 or cols < 1 or cell_w < 1 or cell_h < 1:
        raise ValueError("layout and cell size must be positive")
    width, height = cols * cell_w, rows * cell_h
    if width > MAX_COMPOSITE_WIDTH or height > MAX_COMPOSITE_HEIGHT:
        raise ValueError(
            f"composite {width}x{height} exceeds the "
            f"{MAX_COMPOSITE_WIDTH}x{MAX_COMPOSITE_HEIGHT} maximum"
        )
    canvas = np.empty((height, width, 4), dtype=np.uint8)
    canvas[..., :3] = np.rint(
        np.clip(np.asarray(background, dtype=np.float64), 0.0, 1.0) * 255.0
    ).astype(np.uint8)
    canvas[..., 3] = 255
    for img, (row, col) in tiles:
        if not (0 <= row < rows and 0 <= col < cols):
            raise ValueError(f"grid cell ({row}, {col}) outside {rows}x{cols} layout")
        if img.width > cell_w or img.height > cell_h:
            raise ValueError(
                f"tile {img.width}x{img.height} does not fit cell {cell_w}x{cell_h}"
            )
        x0, y0 = col * cell_w, row * cell_h
        canvas[y0 : y0 + img.height, x0 : x0 + img.width] = img.rgba_grid()
    return Image(width, height, canvas.reshape(-1))
