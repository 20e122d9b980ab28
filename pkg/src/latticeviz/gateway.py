"""Front door for scripts and clients: per-view rendering and the CLI core.

A view tile is rendered by composing the primitives from render.py in
depth order:

* isosurfaces  marching-cubes meshes, z-buffered, flat-colored by the
               view's transfer function at each isolevel
* cut planes   field samples on the plane drawn as a vertex-colored grid
               mesh (exact voxel values at lattice resolution)
* volume       front-to-back ray casting, occluded by the surface
               z-buffer, composited over whatever the surfaces left
* insets       colorbar strip along the bottom edge and a histogram box
               in the top-right corner, stamped over the 3-D content

Every tile is rendered through the shared session camera translated by
the view's grid cell, so one camera motion affects all tiles the same
way.  Rendering is pure: same session, same bytes.

``cli_run`` drives a whole script headlessly and writes one composite
image per snapshot command; ``cli_import`` converts raw voxel blocks.
The long-running network service lives in service.py.
"""

from __future__ import annotations

import base64
import os
import sys
from dataclasses import replace

import numpy as np

from . import language as lang
from .evaluator import Environment, EvalError, evaluate
from .field import histogram
from .geometry import TriangleMesh, extract_cut_plane, marching_cubes
from .ingest import (
    load_field,
    load_raw,
    png_bytes,
    save_field,
    synthesize,
    write_image,
)
from .mathutil import RigidTransform, quat_rotation_matrix, vadd
from .render import (
    MAX_COMPOSITE_HEIGHT,
    MAX_COMPOSITE_WIDTH,
    Camera,
    Image,
    VolumeStyle,
    colorbar_image,
    composite_views,
    draw_triangles,
    histogram_image,
    image_from_float,
    new_raster,
    raycast_float,
)
from .session import Session, View, new_session, view_field

# Interactive per-view renders requested over the wire are capped here;
# larger stills go through snapshot compositing instead.
RENDER_CAP = 512

DEFAULT_SNAPSHOT_SIZE = (960, 600)

# Keyboard bindings understood by the service: mode switches plus the
# legacy console key, kept as an acknowledged no-op.
KEY_MODES = {"c": "camera", "o": "object", "s": "sync"}
NOOP_KEYS = ("u",)

# Every event the evaluator or pointer path can emit; the service ships
# them all inside sceneDelta messages (histograms additionally get a
# dedicated message carrying the same numbers).
SCENE_EVENT_TYPES = frozenset(
    {
        "datasetAdded",
        "datasetChanged",
        "viewAdded",
        "viewRemoved",
        "viewChanged",
        "histogram",
        "modeChanged",
        "cameraChanged",
        "animation",
        "snapshot",
        "scriptError",
        "layoutChanged",
        "scene",
    }
)


def view_camera(session: Session, view: View) -> Camera:
    """The shared camera translated into the view's grid cell."""
    return replace(
        session.camera,
        position=vadd(session.camera.position, view.base_position),
        focal_point=vadd(session.camera.focal_point, view.base_position),
    )


def _placed(points: np.ndarray, placement: RigidTransform) -> np.ndarray:
    """Apply a rigid placement to an (n, 3) point array."""
    m = np.asarray(quat_rotation_matrix(placement.rotation))
    pivot = np.asarray(placement.pivot, dtype=np.float64)
    offset = np.asarray(placement.offset, dtype=np.float64)
    return (np.asarray(points, dtype=np.float64) - pivot) @ m.T + pivot + offset


def _draw_cut_plane(raster, cam, field, plane, tf, placement) -> None:
    # One sample per voxel along the finest axis; cells with any invalid
    # corner are dropped rather than smeared.
    img = extract_cut_plane(field, plane, 1.0 / min(field.spacing))
    w, h = img.width, img.height
    if w < 2 or h < 2:
        return
    origin = np.asarray(img.frame.origin)
    step_u = np.asarray(img.frame.step_u)
    step_v = np.asarray(img.frame.step_v)
    ix, iy = np.meshgrid(np.arange(w), np.arange(h), indexing="xy")
    pts = origin + ix.reshape(-1, 1) * step_u + iy.reshape(-1, 1) * step_v

    valid = img.sample_mask.reshape(h, w)
    ok = valid[:-1, :-1] & valid[:-1, 1:] & valid[1:, :-1] & valid[1:, 1:]
    if not ok.any():
        return
    corner = (np.arange(h - 1)[:, None] * w + np.arange(w - 1)[None, :])[ok]
    tris = np.concatenate(
        [
            np.stack([corner, corner + 1, corner + w], axis=1),
            np.stack([corner + 1, corner + w + 1, corner + w], axis=1),
        ]
    )
    colors = tf.color(img.samples)
    draw_triangles(raster, cam, _placed(pts, placement), tris, vertex_colors=colors)


def _stamp_insets(img: Image, session: Session, view: View) -> None:
    """Overlay colorbar / histogram boxes; skipped when the tile is too small."""
    pad = 4
    w, h = img.width, img.height
    grid = img.rgba_grid()
    if view.show_colorbar:
        bar_h = max(10, h // 12)
        if w - 2 * pad >= 8 and h >= bar_h + 2 * pad:
            bar = colorbar_image(view.tf, (w - 2 * pad, bar_h))
            grid[h - pad - bar_h : h - pad, pad : pad + bar.width] = bar.rgba_grid()
    if view.show_histogram:
        hw, hh = max(8, w // 3), max(8, h // 4)
        if w >= hw + 2 * pad and h >= hh + 2 * pad:
            try:
                hist = histogram(view_field(session, view), view.hist_bins)
            except ValueError:
                return  # nothing unmasked to chart
            box = histogram_image(hist, (hw, hh))
            grid[pad : pad + hh, w - pad - hw : w - pad] = box.rgba_grid()


def render_view(
    session: Session,
    view_id: int,
    size: tuple[int, int],
    style: VolumeStyle | None = None,
) -> Image:
    """Deterministic render of one view's enabled content at ``size``."""
    view = session.view_by_id(view_id)
    style = style or VolumeStyle()
    width, height = int(size[0]), int(size[1])
    field = view_field(session, view)
    placement = view.placement()
    cam = view_camera(session, view)

    raster = new_raster((width, height), style.background)
    for level in view.iso_levels:
        mesh = marching_cubes(field, level)
        if mesh.triangle_count:
            draw_triangles(
                raster,
                cam,
                _placed(mesh.points(), placement),
                mesh.faces(),
                flat_color=tuple(view.tf.color(level)),
            )
    for plane in view.cut_planes:
        _draw_cut_plane(raster, cam, field, plane, view.tf, placement)

    covered = np.isfinite(raster.depth)
    if view.show_volume:
        color, transmittance = raycast_float(
            field,
            view.tf,
            cam,
            replace(style, background=(0.0, 0.0, 0.0)),
            (width, height),
            transform=placement,
            window=view.window,
            depth=raster.depth,
        )
        rgb = color + transmittance[..., None] * raster.rgb
        alpha = 1.0 - transmittance * ~covered
    else:
        rgb = raster.rgb
        alpha = covered.astype(np.float64)

    img = image_from_float(rgb, alpha)
    _stamp_insets(img, session, view)
    return img


def grid_shape(session: Session) -> tuple[int, int]:
    """(rows, cols) of the occupied grid; one empty row when no views."""
    rows = 1 + max((v.cell[0] for v in session.views), default=0)
    return rows, session.layout.cols


def render_session(
    session: Session, size: tuple[int, int], style: VolumeStyle | None = None
) -> Image:
    """Composite every view into its grid cell, filling ``size`` exactly.

    The tile size is the requested size floor-divided by the grid;
    leftover pixels on the right/bottom edges keep the background.
    """
    style = style or VolumeStyle()
    width, height = int(size[0]), int(size[1])
    if width > MAX_COMPOSITE_WIDTH or height > MAX_COMPOSITE_HEIGHT:
        raise ValueError(
            f"composite {width}x{height} exceeds the "
            f"{MAX_COMPOSITE_WIDTH}x{MAX_COMPOSITE_HEIGHT} maximum"
        )
    rows, cols = grid_shape(session)
    cell_w, cell_h = width // cols, height // rows
    if cell_w < 1 or cell_h < 1:
        raise ValueError(f"size {width}x{height} cannot fit a {rows}x{cols} grid")
    tiles = [
        (render_view(session, v.id, (cell_w, cell_h), style), v.cell)
        for v in session.views
    ]
    comp = composite_views(tiles, (rows, cols), (cell_w, cell_h), style.background)
    if comp.width == width and comp.height == height:
        return comp
    canvas = np.empty((height, width, 4), dtype=np.uint8)
    canvas[..., :3] = np.rint(
        np.clip(np.asarray(style.background, dtype=np.float64), 0.0, 1.0) * 255.0
    ).astype(np.uint8)
    canvas[..., 3] = 255
    canvas[: comp.height, : comp.width] = comp.rgba_grid()
    return Image(width, height, canvas.reshape(-1))


def mesh_frame_bytes(mesh: TriangleMesh) -> bytes:
    """Binary mesh frame: u32 vertexCount, u32 triangleCount, then f32
    xyz triples, then u32 index triples, all little-endian."""
    header = np.array([mesh.vertex_count, mesh.triangle_count], dtype="<u4")
    verts = np.ascontiguousarray(mesh.points(), dtype="<f4")
    faces = np.ascontiguousarray(mesh.faces(), dtype="<u4")
    return header.tobytes() + verts.tobytes() + faces.tobytes()


def image_payload(image: Image) -> dict:
    """JSON-ready image: dimensions plus base64 PNG bytes."""
    return {
        "width": image.width,
        "height": image.height,
        "encoding": "png",
        "data": base64.b64encode(png_bytes(image)).decode("ascii"),
    }


def default_environment(
    data_dir: str | None = None, script_dir: str | None = None
) -> Environment:
    """I/O hooks rooted at ``data_dir`` (default $VIZ_DATA_DIR, else cwd).

    Scripts pulled in by ``source`` resolve against ``script_dir``
    (default: the data directory), so a script can sit next to its
    helpers while datasets live elsewhere.
    """
    base = data_dir or os.environ.get("VIZ_DATA_DIR") or "."
    scripts = script_dir or base

    def load_path(path: str):
        return load_field(path if os.path.isabs(path) else os.path.join(base, path))

    def read_text(path: str) -> str:
        full = path if os.path.isabs(path) else os.path.join(scripts, path)
        with open(full, encoding="utf-8") as f:
            return f.read()

    return Environment(load_path=load_path, synthesize=synthesize, read_text=read_text)


def _warn(text: str) -> None:
    print(text, file=sys.stderr)


def cli_run(
    script_path: str,
    *,
    out_dir: str = ".",
    size: tuple[int, int] | None = None,
    strict: bool = False,
    data_dir: str | None = None,
) -> int:
    """Run a script headlessly, writing one image per snapshot command.

    Exit codes: 0 clean run (script errors downgrade to warnings unless
    strict), 1 script error in strict mode, 2 unreadable script, 3
    render or write failure.  A snapshot's own size wins over ``size``,
    which wins over DEFAULT_SNAPSHOT_SIZE.  Snapshots inside sourced
    scripts render with the state at the end of the source command.
    """
    try:
        with open(script_path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        _warn(f"viz run: {e}")
        return 2

    env = default_environment(
        data_dir=data_dir,
        script_dir=os.path.dirname(os.path.abspath(script_path)),
    )
    session = new_session()
    failed = False
    for lineno, parsed in lang.parse_script(text):
        if isinstance(parsed, lang.ParseError):
            _warn(f"{script_path}:{lineno}: {parsed}")
            failed = True
            if strict:
                break
            continue
        try:
            session, events = evaluate(session, parsed, env)
        except EvalError as e:
            _warn(f"{script_path}:{lineno}: {e}")
            failed = True
            if strict:
                break
            continue
        for ev in events:
            if ev["event"] == "snapshot":
                shot = (
                    tuple(ev["size"])
                    if ev["size"]
                    else (tuple(size) if size else DEFAULT_SNAPSHOT_SIZE)
                )
                target = os.path.join(out_dir, ev["path"])
                try:
                    write_image(render_session(session, shot), target)
                except (OSError, ValueError) as e:
                    _warn(f"viz run: cannot write {ev['path']!r}: {e}")
                    return 3
                print(f"wrote {target}")
            elif ev["event"] == "scriptError":
                _warn(f"{ev['path']}:{ev['line']}: {ev['message']}")
                failed = True
        if strict and failed:
            break
    return 1 if (strict and failed) else 0


def cli_import(
    raw_path: str,
    *,
    dims: tuple[int, ...],
    dtype: str = "f32",
    spacing=None,
    origin=None,
    order: str = "f",
    out: str | None = None,
) -> int:
    """Convert a headerless voxel block into the lattice field format."""
    try:
        field = load_raw(
            raw_path, dims, dtype, spacing=spacing, origin=origin, order=order
        )
    except (OSError, ValueError) as e:
        _warn(f"viz import: {e}")
        return 2
    target = out or os.path.splitext(raw_path)[0] + ".ndvf"
    try:
        save_field(field, target)
    except OSError as e:
        _warn(f"viz import: cannot write {target!r}: {e}")
        return 3
    print(f"wrote {target}")
    return 0
