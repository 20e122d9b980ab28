"""Geometry extraction from 3D fields.

Trilinear sampling, 256-case marching cubes isosurfaces, axis-aligned and
oblique cut-plane sample grids, and axis-aligned bounding boxes.  Everything
here is a pure function of an immutable field; marching cubes processes cells
in storage order so output is deterministic.

The sampling domain of a field is its lattice hull: the box spanned by the
voxel centers, ``[origin, origin + (dims-1)*spacing]`` per axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import ScalarField
from .mc_tables import CORNER_OFFSETS, EDGE_CORNERS, EDGE_TABLE, TRI_TABLE


@dataclass(eq=False)
class TriangleMesh:
    """Indexed triangle surface with one scalar per vertex.

    ``vertices`` is a flat float array of xyz triples, ``triangles`` a flat
    int array of vertex-index triples.  Winding is counter-clockwise seen
    from the side the field gradient points to (isosurface normals follow
    increasing field values).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    vertex_scalars: np.ndarray

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1)
        self.vertex_scalars = np.asarray(self.vertex_scalars, dtype=np.float64).reshape(-1)
        if self.vertices.size % 3 or self.triangles.size % 3:
            raise ValueError("vertices and triangles must be flat xyz / index triples")
        if self.vertex_scalars.size != self.vertex_count:
            raise ValueError("need one scalar per vertex")
        if self.triangles.size and self.triangles.max() >= self.vertex_count:
            raise ValueError("triangle index out of range")
        if self.triangles.size and self.triangles.min() < 0:
            raise ValueError("negative triangle index")

    @property
    def vertex_count(self) -> int:
        return self.vertices.size // 3

    @property
    def triangle_count(self) -> int:
        return self.triangles.size // 3

    def points(self) -> np.ndarray:
        """Vertices as an (n, 3) view."""
        return self.vertices.reshape(-1, 3)

    def faces(self) -> np.ndarray:
        return self.triangles.reshape(-1, 3)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TriangleMesh):
            return NotImplemented
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(self.vertex_scalars, other.vertex_scalars)
        )


@dataclass(frozen=True)
class CutPlane:
    """A cutting plane, axis-aligned (axis + offset) or oblique (normal + offset).

    ``offset`` is the world coordinate along the axis, or the signed distance
    from the world origin along ``normal`` for the oblique form.  ``offset``
    may be None meaning "through the center of the data's bounding box".
    """

    axis: int | None = None
    normal: tuple[float, float, float] | None = None
    offset: float | None = None

    def __post_init__(self) -> None:
        if (self.axis is None) == (self.normal is None):
            raise ValueError("CutPlane needs exactly one of axis / normal")
        if self.normal is not None:
            n = np.asarray(self.normal, dtype=np.float64)
            if abs(np.linalg.norm(n) - 1.0) > 1e-9:
                raise ValueError("oblique cut plane normal must be unit length")


@dataclass(frozen=True)
class PlaneFrame:
    """World-space frame of a slice image: origin plus two step vectors.

    Sample (ix, iy) sits at ``origin + ix*step_u + iy*step_v``; the step
    vectors are in-plane and scaled to the sample spacing.
    """

    origin: tuple[float, float, float]
    step_u: tuple[float, float, float]
    step_v: tuple[float, float, float]


@dataclass(eq=False)
class SliceImage:
    width: int
    height: int
    samples: np.ndarray
    sample_mask: np.ndarray
    frame: PlaneFrame

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        self.sample_mask = np.asarray(self.sample_mask, dtype=bool).reshape(-1)
        if self.samples.size != self.width * self.height != self.sample_mask.size:
            raise ValueError("samples length must equal width*height")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SliceImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.frame == other.frame
            and np.array_equal(self.samples, other.samples)
            and np.array_equal(self.sample_mask, other.sample_mask)
        )


@dataclass(frozen=True)
class Aabb:
    min: tuple[float, float, float]
    max: tuple[float, float, float]

    def __post_init__(self) -> None:
        if any(lo > hi for lo, hi in zip(self.min, self.max)):
            raise ValueError(f"Aabb min {self.min} exceeds max {self.max}")

    @property
    def center(self) -> tuple[float, float, float]:
        return tuple((lo + hi) / 2.0 for lo, hi in zip(self.min, self.max))

    @property
    def size(self) -> tuple[float, float, float]:
        return tuple(hi - lo for lo, hi in zip(self.min, self.max))

    def corners(self) -> np.ndarray:
        """The 8 corners, (8, 3), in x-fastest order."""
        lo, hi = self.min, self.max
        return np.array(
            [
                [lo[0], lo[1], lo[2]],
                [hi[0], lo[1], lo[2]],
                [lo[0], hi[1], lo[2]],
                [hi[0], hi[1], lo[2]],
                [lo[0], lo[1], hi[2]],
                [hi[0], lo[1], hi[2]],
                [lo[0], hi[1], hi[2]],
                [hi[0], hi[1], hi[2]],
            ]
        )


def _require_3d(field: ScalarField) -> None:
    if field.ndim != 3:
        raise ValueError(f"operation needs a 3-D field, got {field.ndim} axes")


def field_bounds(field: ScalarField) -> Aabb:
    """Tight world-space bounds of the lattice hull (voxel centers)."""
    lo = field.origin
    hi = tuple(
        o + (d - 1) * s for o, d, s in zip(field.origin, field.dims, field.spacing)
    )
    return Aabb(tuple(lo), hi)


def mesh_bounds(mesh: TriangleMesh) -> Aabb:
    if mesh.vertex_count == 0:
        raise ValueError("bounding box of an empty mesh")
    pts = mesh.points()
    return Aabb(tuple(pts.min(axis=0)), tuple(pts.max(axis=0)))


def bounding_box(obj) -> Aabb:
    """Aabb of a 3-D ScalarField or a TriangleMesh."""
    if isinstance(obj, ScalarField):
        _require_3d(obj)
        return field_bounds(obj)
    if isinstance(obj, TriangleMesh):
        return mesh_bounds(obj)
    raise TypeError(f"no bounding box for {type(obj).__name__}")


def trilinear_sample_many(
    field: ScalarField, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Trilinear interpolation at many world points.

    Returns (values, valid).  A sample is invalid when the point lies outside
    the lattice hull or any contributing voxel (blend weight > 0) is masked;
    invalid samples get value 0.  A sample exactly at a voxel center only
    depends on that voxel, so it stays valid next to masked neighbors.
    """
    _require_3d(field)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    dims = np.array(field.dims)
    origin = np.array(field.origin)
    spacing = np.array(field.spacing)

    u = (pts - origin) / spacing  # lattice coordinates
    inside = np.all((u >= 0.0) & (u <= dims - 1), axis=1)

    # Snap to the valid corner range; degenerate single-voxel axes use a
    # duplicated corner with zero fraction.
    base = np.clip(np.floor(u).astype(np.int64), 0, np.maximum(dims - 2, 0))
    frac = np.clip(u - base, 0.0, 1.0)
    step = np.minimum(1, dims - 1)  # 0 on single-voxel axes

    grid = field.grid()
    mgrid = field.mask_grid()
    i0, j0, k0 = base[:, 0], base[:, 1], base[:, 2]
    i1, j1, k1 = i0 + step[0], j0 + step[1], k0 + step[2]
    fx, fy, fz = frac[:, 0], frac[:, 1], frac[:, 2]

    gx, gy, gz = 1.0 - fx, 1.0 - fy, 1.0 - fz
    values = np.zeros(len(pts))
    all_valid = np.ones(len(pts), dtype=bool)
    for ii, wx in ((i0, gx), (i1, fx)):
        for jj, wy in ((j0, gy), (j1, fy)):
            for kk, wz in ((k0, gz), (k1, fz)):
                w = wx * wy * wz
                values += w * grid[ii, jj, kk]
                # zero-weight corners do not contribute, masked or not
                all_valid &= mgrid[ii, jj, kk] | (w <= 0.0)

    valid = inside & all_valid
    return np.where(valid, values, 0.0), valid


def trilinear_sample(field: ScalarField, point) -> tuple[float, bool]:
    """Single-point convenience wrapper around :func:`trilinear_sample_many`."""
    values, valid = trilinear_sample_many(field, np.asarray(point).reshape(1, 3))
    return float(values[0]), bool(valid[0])


def marching_cubes(field: ScalarField, isovalue: float) -> TriangleMesh:
    """Extract the isosurface of a 3-D field with 256-case marching cubes.

    Cells touching any masked voxel are skipped entirely.  Edge vertices are
    placed by inverse linear interpolation, so every vertex scalar equals the
    isovalue.  Cells are processed in storage order (x fastest); no vertex
    welding is done across cells (see :func:`weld_mesh`).
    """
    _require_3d(field)
    if any(d < 2 for d in field.dims):
        raise ValueError(f"marching cubes needs every extent >= 2, got {field.dims}")
    isovalue = float(isovalue)
    grid = field.grid()
    mgrid = field.mask_grid()
    nx, ny, nz = field.dims
    cx, cy, cz = nx - 1, ny - 1, nz - 1

    # Corner values for every cell at once, shaped (cx, cy, cz, 8).
    corners = np.empty((cx, cy, cz, 8), dtype=np.float64)
    cell_ok = np.ones((cx, cy, cz), dtype=bool)
    for c, (di, dj, dk) in enumerate(CORNER_OFFSETS):
        corners[..., c] = grid[di : di + cx, dj : dj + cy, dk : dk + cz]
        cell_ok &= mgrid[di : di + cx, dj : dj + cy, dk : dk + cz]

    below = corners < isovalue
    case = np.zeros((cx, cy, cz), dtype=np.int32)
    for c in range(8):
        case |= below[..., c].astype(np.int32) << c

    edge_mask = np.asarray(EDGE_TABLE, dtype=np.int32)[case]
    active = (edge_mask != 0) & cell_ok
    # Flat F-order indices give ascending storage order over cells.
    flat = np.nonzero(active.flatten(order="F"))[0]

    origin = np.array(field.origin)
    spacing = np.array(field.spacing)
    corner_offsets = np.array(CORNER_OFFSETS, dtype=np.float64)

    verts: list[np.ndarray] = []
    tris: list[int] = []
    for f in flat:
        i = int(f % cx)
        j = int((f // cx) % cy)
        k = int(f // (cx * cy))
        cvals = corners[i, j, k]
        c = int(case[i, j, k])
        base = origin + np.array([i, j, k], dtype=np.float64) * spacing
        edge_vertex = {}
        mask = EDGE_TABLE[c]
        for e in range(12):
            if not mask & (1 << e):
                continue
            a, b = EDGE_CORNERS[e]
            va, vb = cvals[a], cvals[b]
            t = 0.5 if vb == va else (isovalue - va) / (vb - va)
            pa = base + corner_offsets[a] * spacing
            pb = base + corner_offsets[b] * spacing
            edge_vertex[e] = len(verts)
            verts.append(pa + t * (pb - pa))
        tri_edges = TRI_TABLE[c]
        for n in range(0, len(tri_edges), 3):
            # Published tables wind toward the low-value side; reverse so the
            # facet normal follows the field gradient.
            tris.append(edge_vertex[tri_edges[n]])
            tris.append(edge_vertex[tri_edges[n + 2]])
            tris.append(edge_vertex[tri_edges[n + 1]])

    if not verts:
        return TriangleMesh(
            np.empty(0), np.empty(0, dtype=np.int64), np.empty(0)
        )
    vertices = np.concatenate(verts)
    scalars = np.full(len(verts), isovalue)
    return TriangleMesh(vertices, np.asarray(tris, dtype=np.int64), scalars)


def weld_mesh(mesh: TriangleMesh, tolerance: float = 1e-9) -> TriangleMesh:
    """Merge vertices closer than ``tolerance`` (for watertightness checks).

    Vertices are snapped to a tolerance grid; the first vertex of each
    cluster survives, preserving the original ordering.
    """
    if mesh.vertex_count == 0:
        return mesh
    pts = mesh.points()
    keys = np.round(pts / tolerance).astype(np.int64)
    _, first, inverse = np.unique(
        keys, axis=0, return_index=True, return_inverse=True
    )
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    remap = rank[inverse]
    new_pts = pts[first[order]]
    new_scalars = mesh.vertex_scalars[first[order]]
    new_tris = remap[mesh.faces()].reshape(-1)
    return TriangleMesh(new_pts.reshape(-1), new_tris, new_scalars)


def mesh_area(mesh: TriangleMesh) -> float:
    """Total surface area (sum of facet areas)."""
    if mesh.triangle_count == 0:
        return 0.0
    pts = mesh.points()
    f = mesh.faces()
    a = pts[f[:, 1]] - pts[f[:, 0]]
    b = pts[f[:, 2]] - pts[f[:, 0]]
    return float(0.5 * np.linalg.norm(np.cross(a, b), axis=1).sum())


def _plane_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Deterministic in-plane orthonormal basis: pair the normal with the
    # world axis least aligned with it.
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(normal)))] = 1.0
    u = np.cross(normal, helper)
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    return u, v


def extract_cut_plane(
    field: ScalarField, plane: CutPlane, resolution: float
) -> SliceImage:
    """Sample the field on a regular grid covering plane ∩ bounding box.

    ``resolution`` is samples per world unit; sample spacing is
    1/resolution.  The grid is anchored at the projection of the box corners
    so an axis-aligned plane through a voxel-center layer sampled at
    1/spacing reproduces that layer's voxel values exactly.
    """
    _require_3d(field)
    if resolution <= 0:
        raise ValueError(f"resolution must be > 0, got {resolution}")
    box = field_bounds(field)
    center = np.array(box.center)

    if plane.axis is not None:
        ax = int(plane.axis)
        if not 0 <= ax < 3:
            raise IndexError(f"cut plane axis {ax} out of range")
        offset = box.center[ax] if plane.offset is None else float(plane.offset)
        if not box.min[ax] <= offset <= box.max[ax]:
            raise ValueError(
                f"cut plane {field.axis_names[ax]}={offset} misses the data bounds "
                f"[{box.min[ax]}, {box.max[ax]}]"
            )
        normal = np.zeros(3)
        normal[ax] = 1.0
        point_on_plane = center.copy()
        point_on_plane[ax] = offset
        # Cyclic in-plane axes keep sample (ix, iy) aligned with the lattice.
        u = np.zeros(3)
        v = np.zeros(3)
        u[(ax + 1) % 3] = 1.0
        v[(ax + 2) % 3] = 1.0
    else:
        normal = np.asarray(plane.normal, dtype=np.float64)
        offset = (
            float(np.dot(normal, center)) if plane.offset is None else float(plane.offset)
        )
        dots = bounding_box(field).corners() @ normal
        if offset < dots.min() - 1e-12 or offset > dots.max() + 1e-12:
            raise ValueError(
                f"cut plane at offset {offset} misses the data bounds "
                f"[{dots.min()}, {dots.max()}] along its normal"
            )
        point_on_plane = center - (np.dot(normal, center) - offset) * normal
        u, v = _plane_basis(normal)

    rel = bounding_box(field).corners() - point_on_plane
    us, vs = rel @ u, rel @ v
    step = 1.0 / float(resolution)
    width = int(np.floor((us.max() - us.min()) / step + 1e-9)) + 1
    height = int(np.floor((vs.max() - vs.min()) / step + 1e-9)) + 1
    frame_origin = point_on_plane + us.min() * u + vs.min() * v

    ix, iy = np.meshgrid(np.arange(width), np.arange(height), indexing="xy")
    pts = (
        frame_origin
        + ix.reshape(-1, 1) * step * u
        + iy.reshape(-1, 1) * step * v
    )
    samples, valid = trilinear_sample_many(field, pts)
    frame = PlaneFrame(tuple(frame_origin), tuple(step * u), tuple(step * v))
    return SliceImage(width, height, samples, valid, frame)
