"""Multiview session state: datasets, views on a grid, camera, modes.

A Session is an immutable value; every operation returns a new Session,
so failed operations leave the original untouched and snapshots for
rendering are free.  Vectors and quaternions are plain float tuples,
which keeps structural equality of sessions exact (`==`).

Placement of a view's geometry follows the actor convention: the object
rotates about the pivot given in its own (raw) coordinates, then the
whole thing is translated into its grid cell,

    T(p) = basePosition + objectTranslation + pivot + q (p - pivot) q*

where pivot is the raw data bounding-box center.  The stored
``object_origin`` is that pivot translated by ``base_position``; with no
user translation it is exactly the world point rotations preserve.

Interaction modes:

* camera  - pointer events orbit/pan/zoom the one shared camera.
* object  - pointer events rotate/translate a single targeted view's data.
* sync    - the same increment is applied to every view, each about its
            own pivot.

Pointer deltas are in normalized screen units, +x right and +y up;
dragging moves the scene content with the pointer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .field import ScalarField, project, slice_field, stats
from .geometry import Aabb, CutPlane, field_bounds
from .mathutil import (
    IDENTITY_QUAT,
    Quat,
    RigidTransform,
    Vec3,
    quat_from_axis_angle,
    quat_mul,
    quat_normalize,
    quat_rotate,
    vadd,
    vdot,
    vnormalize,
    vscale,
    vsub,
)
from .render import Camera
from .transfer import TransferFunction, palette_transfer_function

MODES = ("camera", "object", "sync")
POINTER_KINDS = ("rotateDrag", "panDrag", "zoomDrag")

# Orbit elevation stays inside +/-89 degrees so the camera never aligns
# with its own up vector.
_MAX_ELEVATION = math.radians(89.0)

Derivation = tuple | None  # ("slice", axis, index) | ("project", axis, reducer)


@dataclass(frozen=True)
class LayoutSpec:
    """Grid geometry in world units: columns and the world size of a cell."""

    cols: int = 4
    cell_width: float = 20.0
    cell_height: float = 20.0

    def __post_init__(self) -> None:
        if self.cols < 1:
            raise ValueError(f"layout needs cols >= 1, got {self.cols}")
        if self.cell_width <= 0 or self.cell_height <= 0:
            raise ValueError("layout cell sizes must be positive")


@dataclass(frozen=True)
class View:
    id: int
    cell: tuple[int, int]  # (row, col)
    source: str
    derivation: Derivation
    show_volume: bool
    iso_levels: tuple[float, ...]
    cut_planes: tuple[CutPlane, ...]
    tf: TransferFunction
    window: tuple[float, float] | None  # scalar range gate for the volume
    show_colorbar: bool
    show_histogram: bool
    hist_bins: int
    base_position: Vec3
    object_origin: Vec3
    object_rotation: Quat
    object_translation: Vec3

    def __post_init__(self) -> None:
        if self.base_position[2] != 0.0:
            raise ValueError("base position is confined to the xy plane (z == 0)")
        n = math.sqrt(sum(c * c for c in self.object_rotation))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"object rotation must be a unit quaternion, |q|={n}")

    @property
    def pivot(self) -> Vec3:
        """Rotation pivot in raw dataset coordinates."""
        return vsub(self.object_origin, self.base_position)

    def placement(self) -> RigidTransform:
        return RigidTransform(
            offset=vadd(self.base_position, self.object_translation),
            pivot=self.pivot,
            rotation=self.object_rotation,
        )


@dataclass(frozen=True)
class PointerEvent:
    kind: str  # rotateDrag | panDrag | zoomDrag
    delta: tuple[float, float]
    target_view: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in POINTER_KINDS:
            raise ValueError(f"unknown pointer kind {self.kind!r}")
        if not all(math.isfinite(d) for d in self.delta):
            raise ValueError("pointer deltas must be finite")


@dataclass(frozen=True)
class Session:
    datasets: dict[str, ScalarField]
    recipes: dict[str, tuple]
    views: tuple[View, ...]
    layout: LayoutSpec
    camera: Camera
    mode: str = "camera"
    next_view_id: int = 0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        ids = [v.id for v in self.views]
        if len(set(ids)) != len(ids):
            raise ValueError("view ids must be unique")
        cells = [v.cell for v in self.views]
        if len(set(cells)) != len(cells):
            raise ValueError("view cells must be unique")

    def view_by_id(self, view_id: int) -> View:
        for view in self.views:
            if view.id == view_id:
                return view
        raise KeyError(f"no view with id {view_id}")


DEFAULT_CAMERA = Camera(
    position=(10.0, -60.0, 25.0),
    focal_point=(10.0, -10.0, 7.5),
    view_up=(0.0, 0.0, 1.0),
    vertical_fov_degrees=30.0,
)


def new_session(camera: Camera = DEFAULT_CAMERA, layout: LayoutSpec | None = None) -> Session:
    return Session(
        datasets={},
        recipes={},
        views=(),
        layout=layout or LayoutSpec(),
        camera=camera,
        mode="camera",
        next_view_id=0,
    )


def add_dataset(
    session: Session, name: str, field: ScalarField, recipe: tuple
) -> Session:
    """Bind (or re-bind) a named dataset together with its build recipe."""
    datasets = dict(session.datasets)
    recipes = dict(session.recipes)
    datasets[name] = field
    recipes[name] = recipe
    return replace(session, datasets=datasets, recipes=recipes)


def apply_derivation(field: ScalarField, derivation: Derivation) -> ScalarField:
    if derivation is None:
        return field
    kind = derivation[0]
    if kind == "slice":
        _, axis, index = derivation
        return slice_field(field, axis, index)
    if kind == "project":
        _, axis, reducer = derivation
        return project(field, axis, reducer)
    raise ValueError(f"unknown derivation kind {derivation[0]!r}")


def view_field(session: Session, view: View) -> ScalarField:
    """The 3-D dataset a view displays (source with derivation applied)."""
    return apply_derivation(session.datasets[view.source], view.derivation)


def default_transfer(field: ScalarField) -> TransferFunction:
    """Grayscale ramp over the dataset's valid value range."""
    st = stats(field)
    if st.min is None:
        lo, hi = 0.0, 1.0
    elif st.min == st.max:
        lo, hi = st.min - 0.5, st.max + 0.5
    else:
        lo, hi = st.min, st.max
    return palette_transfer_function("gray", lo, hi)


def _first_free_cell(session: Session) -> tuple[int, int]:
    taken = {v.cell for v in session.views}
    row = 0
    while True:
        for col in range(session.layout.cols):
            if (row, col) not in taken:
                return (row, col)
        row += 1


def base_position_for(layout: LayoutSpec, cell: tuple[int, int]) -> Vec3:
    row, col = cell
    return (col * layout.cell_width, -row * layout.cell_height, 0.0)


def add_view(
    session: Session,
    source: str,
    derivation: Derivation = None,
    cell: tuple[int, int] | None = None,
) -> tuple[Session, int]:
    """Add a view of a dataset; returns the new session and the view id.

    The cell defaults to the first free grid cell in row-major order.
    """
    if source not in session.datasets:
        raise KeyError(f"unknown dataset {source!r}")
    derived = apply_derivation(session.datasets[source], derivation)
    if derived.ndim != 3:
        raise ValueError(
            f"views need 3-D data; {source!r} with this derivation has "
            f"{derived.ndim} axes"
        )
    if cell is not None:
        if cell in {v.cell for v in session.views}:
            raise ValueError(f"cell {cell} is already occupied")
        if cell[0] < 0 or cell[1] < 0 or cell[1] >= session.layout.cols:
            raise ValueError(f"cell {cell} outside a {session.layout.cols}-column grid")
    else:
        cell = _first_free_cell(session)

    base = base_position_for(session.layout, cell)
    center = field_bounds(derived).center
    view = View(
        id=session.next_view_id,
        cell=cell,
        source=source,
        derivation=derivation,
        show_volume=True,
        iso_levels=(),
        cut_planes=(),
        tf=default_transfer(derived),
        window=None,
        show_colorbar=False,
        show_histogram=False,
        hist_bins=64,
        base_position=base,
        object_origin=vadd(center, base),
        object_rotation=IDENTITY_QUAT,
        object_translation=(0.0, 0.0, 0.0),
    )
    new = replace(
        session, views=session.views + (view,), next_view_id=session.next_view_id + 1
    )
    return new, view.id


def remove_view(session: Session, view_id: int) -> Session:
    """Remove a view; remaining views keep their ids and cells."""
    session.view_by_id(view_id)
    return replace(
        session, views=tuple(v for v in session.views if v.id != view_id)
    )


def set_layout(session: Session, layout: LayoutSpec) -> Session:
    """Change the grid; views keep their cells and their placements move.

    Base positions and object origins are re-derived from the new cell
    size; rotations and user translations are preserved.
    """
    for v in session.views:
        if v.cell[1] >= layout.cols:
            raise ValueError(
                f"view {v.id} sits in column {v.cell[1]}, outside a "
                f"{layout.cols}-column grid"
            )
    views = []
    for v in session.views:
        pivot = v.pivot
        base = base_position_for(layout, v.cell)
        views.append(
            replace(v, base_position=base, object_origin=vadd(pivot, base))
        )
    return replace(session, layout=layout, views=tuple(views))


def replace_view(session: Session, view: View) -> Session:
    views = tuple(view if v.id == view.id else v for v in session.views)
    return replace(session, views=views)


def set_mode(session: Session, mode: str) -> Session:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    return replace(session, mode=mode)


# --- pointer handling -------------------------------------------------------


def _orbit_camera_drag(cam: Camera, dx: float, dy: float) -> Camera:
    up_unit = vnormalize(cam.view_up)
    right, _, _ = cam.basis()
    offset = vsub(cam.position, cam.focal_point)

    e0 = math.asin(max(-1.0, min(1.0, vdot(vnormalize(offset), up_unit))))
    e1 = max(-_MAX_ELEVATION, min(_MAX_ELEVATION, e0 + dy * math.pi))
    q_el = quat_from_axis_angle(right, e0 - e1)
    q_az = quat_from_axis_angle(up_unit, dx * math.pi)
    new_offset = quat_rotate(quat_mul(q_az, q_el), offset)
    return replace(cam, position=vadd(cam.focal_point, new_offset))


def _pan_camera_drag(cam: Camera, dx: float, dy: float) -> Camera:
    right, up, _ = cam.basis()
    shift = vscale(vadd(vscale(right, -dx), vscale(up, -dy)), cam.distance)
    return replace(
        cam,
        position=vadd(cam.position, shift),
        focal_point=vadd(cam.focal_point, shift),
    )


def _zoom_camera_drag(cam: Camera, dy: float) -> Camera:
    offset = vsub(cam.position, cam.focal_point)
    return replace(
        cam, position=vadd(cam.focal_point, vscale(offset, math.exp(dy)))
    )


def _object_increment(cam: Camera, ev: PointerEvent, view: View) -> View:
    dx, dy = ev.delta
    right, up, forward = cam.basis()
    if ev.kind == "rotateDrag":
        q_inc = quat_mul(
            quat_from_axis_angle(up, dx * math.pi) if dx != 0.0 else IDENTITY_QUAT,
            quat_from_axis_angle(right, dy * math.pi) if dy != 0.0 else IDENTITY_QUAT,
        )
        rotation = quat_normalize(quat_mul(q_inc, view.object_rotation))
        return replace(view, object_rotation=rotation)
    if ev.kind == "panDrag":
        shift = vscale(vadd(vscale(right, dx), vscale(up, dy)), cam.distance)
        return replace(view, object_translation=vadd(view.object_translation, shift))
    # zoomDrag: push the object along the view direction.
    shift = vscale(forward, cam.distance * (math.exp(dy) - 1.0))
    return replace(view, object_translation=vadd(view.object_translation, shift))


def handle_pointer(session: Session, ev: PointerEvent) -> Session:
    """Apply one pointer event under the current interaction mode.

    Camera mode moves only the shared camera; object mode moves only the
    targeted view's data; sync mode applies the identical increment to
    every view about its own pivot.  A zero-delta event returns the
    session unchanged (the identical object).
    """
    dx, dy = ev.delta
    if dx == 0.0 and dy == 0.0:
        return session

    if session.mode == "camera":
        if ev.kind == "rotateDrag":
            cam = _orbit_camera_drag(session.camera, dx, dy)
        elif ev.kind == "panDrag":
            cam = _pan_camera_drag(session.camera, dx, dy)
        else:
            cam = _zoom_camera_drag(session.camera, dy)
        return replace(session, camera=cam)

    if session.mode == "object":
        if ev.target_view is None:
            raise ValueError("object mode needs a target view")
        view = session.view_by_id(ev.target_view)
        return replace_view(session, _object_increment(session.camera, ev, view))

    # sync: same increment for every view, each about its own pivot.
    views = tuple(_object_increment(session.camera, ev, v) for v in session.views)
    return replace(session, views=views)


# --- assembly and animation -------------------------------------------------


@dataclass(frozen=True)
class PlacedView:
    view_id: int
    transform: RigidTransform
    bounds: Aabb  # raw (untransformed) bounds of the view's dataset

    def world_corners(self):
        import numpy as np

        return np.array(
            [self.transform.apply_point(tuple(c)) for c in self.bounds.corners()]
        )


def world_assembly(session: Session) -> list[PlacedView]:
    """Placement transform and raw bounds for every view, ordered by id."""
    placed = []
    for view in sorted(session.views, key=lambda v: v.id):
        derived = view_field(session, view)
        placed.append(
            PlacedView(
                view_id=view.id,
                transform=view.placement(),
                bounds=field_bounds(derived),
            )
        )
    return placed


_WORLD_AXES = {
    "x": (1.0, 0.0, 0.0),
    "y": (0.0, 1.0, 0.0),
    "z": (0.0, 0.0, 1.0),
    0: (1.0, 0.0, 0.0),
    1: (0.0, 1.0, 0.0),
    2: (0.0, 0.0, 1.0),
}


def _world_axis(axis) -> Vec3:
    try:
        return _WORLD_AXES[axis]
    except (KeyError, TypeError):
        raise ValueError(f"axis {axis!r} has no world direction (use x, y, or z)")


def _orbit_camera_step(session: Session, axis_vec: Vec3, radians: float) -> Session:
    q = quat_from_axis_angle(axis_vec, radians)
    cam = session.camera
    offset = quat_rotate(q, vsub(cam.position, cam.focal_point))
    cam = replace(
        cam,
        position=vadd(cam.focal_point, offset),
        view_up=quat_rotate(q, cam.view_up),
    )
    return replace(session, camera=cam)


def _rotate_objects_step(session: Session, axis_vec: Vec3, radians: float) -> Session:
    q = quat_from_axis_angle(axis_vec, radians)
    views = tuple(
        replace(v, object_rotation=quat_normalize(quat_mul(q, v.object_rotation)))
        for v in session.views
    )
    return replace(session, views=views)


def animate(session: Session, kind: str, axis, degrees: float, frames: int) -> list[Session]:
    """Generate per-frame session snapshots for a turntable animation.

    ``rotate`` follows the current mode: it orbits the camera in camera
    mode and spins every object (about its own pivot) otherwise.
    ``orbit`` always orbits the camera about the world axis through its
    focal point.  The increment per frame is degrees/frames; the caller's
    session is left untouched (use the last snapshot to continue).
    """
    if kind not in ("rotate", "orbit"):
        raise ValueError(f"unknown animation kind {kind!r}; expected rotate|orbit")
    if frames < 1:
        raise ValueError(f"frames must be >= 1, got {frames}")
    if not math.isfinite(degrees):
        raise ValueError("degrees must be finite")
    axis_vec = _world_axis(axis)
    step = math.radians(degrees / frames)
    orbit = kind == "orbit" or session.mode == "camera"
    snapshots = []
    cur = session
    for _ in range(frames):
        if orbit:
            cur = _orbit_camera_step(cur, axis_vec, step)
        else:
            cur = _rotate_objects_step(cur, axis_vec, step)
        snapshots.append(cur)
    return snapshots


# --- save / restore ----------------------------------------------------------

DOC_VERSION = 1


def _tf_to_doc(tf: TransferFunction) -> dict:
    return {
        "paletteName": tf.palette_name,
        "colorPoints": [[s, list(rgb)] for s, rgb in tf.color_points],
        "opacityPoints": [[s, a] for s, a in tf.opacity_points],
    }


def _tf_from_doc(doc: dict) -> TransferFunction:
    return TransferFunction(
        tuple((s, tuple(rgb)) for s, rgb in doc["colorPoints"]),
        tuple((s, a) for s, a in doc["opacityPoints"]),
        palette_name=doc["paletteName"],
    )


def _cut_to_doc(cut: CutPlane) -> dict:
    return {
        "axis": cut.axis,
        "normal": None if cut.normal is None else list(cut.normal),
        "offset": cut.offset,
    }


def _cut_from_doc(doc: dict) -> CutPlane:
    return CutPlane(
        axis=doc["axis"],
        normal=None if doc["normal"] is None else tuple(doc["normal"]),
        offset=doc["offset"],
    )


def _recipe_to_doc(recipe: tuple):
    kind = recipe[0]
    if kind == "load":
        return {"kind": "load", "path": recipe[1]}
    if kind == "synth":
        return {
            "kind": "synth",
            "generator": recipe[1],
            "params": [[k, list(v) if isinstance(v, tuple) else v] for k, v in recipe[2]],
        }
    if kind == "slice":
        index = list(recipe[3]) if isinstance(recipe[3], tuple) else recipe[3]
        return {
            "kind": "slice", "source": _recipe_to_doc(recipe[1]),
            "axis": recipe[2], "index": index,
        }
    if kind == "project":
        return {
            "kind": "project", "source": _recipe_to_doc(recipe[1]),
            "axis": recipe[2], "reducer": recipe[3],
        }
    if kind == "filter":
        return {
            "kind": "filter", "source": _recipe_to_doc(recipe[1]),
            "min": recipe[2], "max": recipe[3],
        }
    raise ValueError(f"unknown recipe kind {kind!r}")


def _recipe_from_doc(doc: dict) -> tuple:
    kind = doc["kind"]
    if kind == "load":
        return ("load", doc["path"])
    if kind == "synth":
        params = tuple(
            (k, tuple(v) if isinstance(v, list) else v) for k, v in doc["params"]
        )
        return ("synth", doc["generator"], params)
    if kind == "slice":
        index = tuple(doc["index"]) if isinstance(doc["index"], list) else doc["index"]
        return ("slice", _recipe_from_doc(doc["source"]), doc["axis"], index)
    if kind == "project":
        return ("project", _recipe_from_doc(doc["source"]), doc["axis"], doc["reducer"])
    if kind == "filter":
        return ("filter", _recipe_from_doc(doc["source"]), doc["min"], doc["max"])
    raise ValueError(f"unknown recipe kind {kind!r}")


def build_dataset(recipe: tuple, load_path, synthesize) -> ScalarField:
    """Materialize a dataset from its recipe tree.

    ``load_path(path)`` reads a field from storage; ``synthesize(name,
    params)`` runs a named generator.  Derived steps reuse the same field
    operations the evaluator applies.
    """
    from .field import filter_range

    kind = recipe[0]
    if kind == "load":
        return load_path(recipe[1])
    if kind == "synth":
        return synthesize(recipe[1], dict(recipe[2]))
    if kind == "slice":
        return slice_field(build_dataset(recipe[1], load_path, synthesize), recipe[2], recipe[3])
    if kind == "project":
        return project(build_dataset(recipe[1], load_path, synthesize), recipe[2], recipe[3])
    if kind == "filter":
        return filter_range(
            build_dataset(recipe[1], load_path, synthesize), lo=recipe[2], hi=recipe[3]
        )
    raise ValueError(f"unknown recipe kind {kind!r}")


def _view_to_doc(view: View) -> dict:
    derivation = None
    if view.derivation is not None:
        if view.derivation[0] == "slice":
            derivation = {"kind": "slice", "axis": view.derivation[1], "index": view.derivation[2]}
        else:
            derivation = {"kind": "project", "axis": view.derivation[1], "reducer": view.derivation[2]}
    return {
        "id": view.id,
        "cell": list(view.cell),
        "source": view.source,
        "derivation": derivation,
        "showVolume": view.show_volume,
        "isoLevels": list(view.iso_levels),
        "cutPlanes": [_cut_to_doc(c) for c in view.cut_planes],
        "tf": _tf_to_doc(view.tf),
        "window": None if view.window is None else list(view.window),
        "showColorbar": view.show_colorbar,
        "showHistogram": view.show_histogram,
        "histBins": view.hist_bins,
        "basePosition": list(view.base_position),
        "objectOrigin": list(view.object_origin),
        "objectRotation": list(view.object_rotation),
        "objectTranslation": list(view.object_translation),
    }


def _view_from_doc(doc: dict) -> View:
    derivation = None
    der = doc["derivation"]
    if der is not None:
        if der["kind"] == "slice":
            derivation = ("slice", der["axis"], der["index"])
        else:
            derivation = ("project", der["axis"], der["reducer"])
    return View(
        id=doc["id"],
        cell=tuple(doc["cell"]),
        source=doc["source"],
        derivation=derivation,
        show_volume=doc["showVolume"],
        iso_levels=tuple(doc["isoLevels"]),
        cut_planes=tuple(_cut_from_doc(c) for c in doc["cutPlanes"]),
        tf=_tf_from_doc(doc["tf"]),
        window=None if doc["window"] is None else tuple(doc["window"]),
        show_colorbar=doc["showColorbar"],
        show_histogram=doc["showHistogram"],
        hist_bins=doc["histBins"],
        base_position=tuple(doc["basePosition"]),
        object_origin=tuple(doc["objectOrigin"]),
        object_rotation=tuple(doc["objectRotation"]),
        object_translation=tuple(doc["objectTranslation"]),
    )


def session_to_doc(session: Session) -> dict:
    """JSON-ready document capturing the whole session reproducibly.

    Datasets are stored as build recipes (load paths, generator calls,
    and the derivation chain), not as raw arrays.
    """
    cam = session.camera
    return {
        "version": DOC_VERSION,
        "mode": session.mode,
        "camera": {
            "position": list(cam.position),
            "focal": list(cam.focal_point),
            "up": list(cam.view_up),
            "fov": cam.vertical_fov_degrees,
        },
        "layout": {
            "cols": session.layout.cols,
            "cellWidth": session.layout.cell_width,
            "cellHeight": session.layout.cell_height,
        },
        "nextViewId": session.next_view_id,
        "datasets": {
            name: _recipe_to_doc(recipe) for name, recipe in sorted(session.recipes.items())
        },
        "views": [_view_to_doc(v) for v in session.views],
    }


def session_from_doc(doc: dict, load_path, synthesize) -> Session:
    """Rebuild a session from its document; inverse of session_to_doc."""
    if doc.get("version") != DOC_VERSION:
        raise ValueError(f"unsupported session document version {doc.get('version')!r}")
    cam_doc = doc["camera"]
    camera = Camera(
        position=tuple(cam_doc["position"]),
        focal_point=tuple(cam_doc["focal"]),
        view_up=tuple(cam_doc["up"]),
        vertical_fov_degrees=cam_doc["fov"],
    )
    layout = LayoutSpec(
        cols=doc["layout"]["cols"],
        cell_width=doc["layout"]["cellWidth"],
        cell_height=doc["layout"]["cellHeight"],
    )
    recipes = {name: _recipe_from_doc(r) for name, r in doc["datasets"].items()}
    datasets = {
        name: build_dataset(recipe, load_path, synthesize)
        for name, recipe in recipes.items()
    }
    return Session(
        datasets=datasets,
        recipes=recipes,
        views=tuple(_view_from_doc(v) for v in doc["views"]),
        layout=layout,
        camera=camera,
        mode=doc["mode"],
        next_view_id=doc["nextViewId"],
    )
