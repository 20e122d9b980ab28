"""Multiview visualization of 3D/4D scalar lattice fields.

Headless-first: fields, reductions, isosurfaces, cut planes, CPU volume
rendering, a session model with synchronized interaction modes, a small
command language driving it all, and a CLI / network gateway on top.
"""

from .field import (
    FieldStats,
    Histogram,
    ScalarField,
    constant_field,
    filter_range,
    histogram,
    make_field,
    project,
    slice_field,
    stats,
)
from .geometry import (
    Aabb,
    CutPlane,
    PlaneFrame,
    SliceImage,
    TriangleMesh,
    bounding_box,
    extract_cut_plane,
    field_bounds,
    marching_cubes,
    mesh_area,
    mesh_bounds,
    trilinear_sample,
    trilinear_sample_many,
    weld_mesh,
)
from .gateway import (
    default_environment,
    mesh_frame_bytes,
    render_session,
    render_view,
)
from .mathutil import RigidTransform
from .render import (
    Camera,
    Image,
    VolumeStyle,
    colorbar_image,
    composite_views,
    histogram_image,
    rasterize_mesh,
    raycast,
)
from .transfer import PALETTES, TransferFunction, palette_transfer_function

__version__ = "0.1.0"

__all__ = [
    "Aabb",
    "Camera",
    "CutPlane",
    "FieldStats",
    "Histogram",
    "Image",
    "PALETTES",
    "PlaneFrame",
    "RigidTransform",
    "ScalarField",
    "SliceImage",
    "TransferFunction",
    "TriangleMesh",
    "VolumeStyle",
    "bounding_box",
    "colorbar_image",
    "composite_views",
    "constant_field",
    "default_environment",
    "extract_cut_plane",
    "field_bounds",
    "filter_range",
    "histogram",
    "histogram_image",
    "make_field",
    "marching_cubes",
    "mesh_area",
    "mesh_bounds",
    "mesh_frame_bytes",
    "palette_transfer_function",
    "project",
    "rasterize_mesh",
    "raycast",
    "render_session",
    "render_view",
    "slice_field",
    "stats",
    "trilinear_sample",
    "trilinear_sample_many",
    "weld_mesh",
]
