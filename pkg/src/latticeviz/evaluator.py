"""Applies parsed commands to a session.

``evaluate`` is a pure transition: it returns a new session plus a list
of events describing what changed, and raises EvalError without touching
the input session otherwise.  Events are plain JSON-ready dicts with an
``event`` key so the network layer can forward them verbatim.

Commands that need the outside world (load, synth, source) go through an
Environment of callbacks, keeping this module free of file-format and
generator knowledge.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

from . import language as lang
from .field import ScalarField, filter_range, histogram, project, slice_field
from .geometry import CutPlane
from .mathutil import vnormalize
from .render import Camera
from .session import (
    LayoutSpec,
    Session,
    View,
    add_dataset,
    add_view,
    animate,
    remove_view,
    replace_view,
    set_layout,
    set_mode,
)
from .transfer import PALETTES, TransferFunction


class EvalError(Exception):
    """A command that cannot be applied; the session is left unchanged."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


@dataclass
class Environment:
    """Outside-world hooks for commands that do I/O.

    load_path(path) -> ScalarField, synthesize(name, params) -> ScalarField,
    read_text(path) -> str.  Leave a hook as None to reject the command.
    """

    load_path: Callable[[str], ScalarField] | None = None
    synthesize: Callable[[str, dict], ScalarField] | None = None
    read_text: Callable[[str], str] | None = None


def _require_dataset(session: Session, name: str) -> ScalarField:
    try:
        return session.datasets[name]
    except KeyError:
        raise EvalError("unknown-dataset", f"unknown dataset {name!r}") from None


def _require_view(session: Session, view_id: int) -> View:
    try:
        return session.view_by_id(view_id)
    except KeyError:
        raise EvalError("unknown-view", f"no view with id {view_id}") from None


def _require_free_name(session: Session, name: str) -> None:
    if name in session.datasets:
        raise EvalError("name-exists", f"dataset {name!r} already exists")


def _resolve_axis(field: ScalarField, axis) -> int:
    try:
        return field.axis_index(axis)
    except IndexError as e:
        raise EvalError("unknown-axis", str(e)) from None


def _view_changed(view_id: int) -> dict:
    return {"event": "viewChanged", "viewId": view_id}


def _target_views(session: Session, view_id) -> list[View]:
    if view_id == "all":
        return list(session.views)
    return [_require_view(session, view_id)]


def _eval_load(session, ast, env):
    if env.load_path is None:
        raise EvalError("no-io", "no data loader configured")
    _require_free_name(session, ast.name)
    try:
        field = env.load_path(ast.path)
    except (OSError, ValueError) as e:
        raise EvalError("io-error", f"cannot load {ast.path!r}: {e}") from None
    session = add_dataset(session, ast.name, field, ("load", ast.path))
    return session, [{"event": "datasetAdded", "name": ast.name}]


_SIZE_WORD = re.compile(r"^\d+(?:x\d+)+$")


def _param_value(v):
    """Generator parameters arrive as written; 16x16x16 means a size tuple."""
    if isinstance(v, str) and _SIZE_WORD.match(v):
        return tuple(int(part) for part in v.split("x"))
    return v


def _eval_synth(session, ast, env):
    if env.synthesize is None:
        raise EvalError("no-io", "no generator backend configured")
    _require_free_name(session, ast.name)
    params = tuple((k, _param_value(v)) for k, v in ast.params)
    try:
        field = env.synthesize(ast.generator, dict(params))
    except (KeyError, TypeError, ValueError) as e:
        raise EvalError("unknown-generator", f"synth {ast.generator!r}: {e}") from None
    session = add_dataset(session, ast.name, field, ("synth", ast.generator, params))
    return session, [{"event": "datasetAdded", "name": ast.name}]


def _eval_slice(session, ast, env):
    field = _require_dataset(session, ast.source)
    _resolve_axis(field, ast.axis)
    parent = session.recipes[ast.source]
    if isinstance(ast.index, tuple):
        lo, hi = ast.index
        pairs = [(f"{ast.name}{i}", i) for i in range(lo, hi + 1)]
    else:
        pairs = [(ast.name, ast.index)]
    for name, _ in pairs:
        _require_free_name(session, name)
    events = []
    for name, index in pairs:
        try:
            sliced = slice_field(field, ast.axis, index)
        except IndexError as e:
            raise EvalError("bad-index", str(e)) from None
        except ValueError as e:
            raise EvalError("invalid-operation", str(e)) from None
        session = add_dataset(
            session, name, sliced, ("slice", parent, ast.axis, index)
        )
        events.append({"event": "datasetAdded", "name": name})
    return session, events


def _eval_project(session, ast, env):
    field = _require_dataset(session, ast.source)
    _resolve_axis(field, ast.axis)
    _require_free_name(session, ast.name)
    try:
        projected = project(field, ast.axis, ast.reducer)
    except ValueError as e:
        raise EvalError("unknown-reducer", str(e)) from None
    session = add_dataset(
        session, ast.name, projected,
        ("project", session.recipes[ast.source], ast.axis, ast.reducer),
    )
    return session, [{"event": "datasetAdded", "name": ast.name}]


def _eval_filter(session, ast, env):
    field = _require_dataset(session, ast.source)
    try:
        filtered = filter_range(field, lo=ast.lo, hi=ast.hi)
    except ValueError as e:
        raise EvalError("invalid-filter", str(e)) from None
    session = add_dataset(
        session, ast.source, filtered,
        ("filter", session.recipes[ast.source], ast.lo, ast.hi),
    )
    return session, [{"event": "datasetChanged", "name": ast.source}]


def _eval_view_add(session, ast, env):
    field = _require_dataset(session, ast.source)
    if field.ndim != 3:
        raise EvalError(
            "needs-3d",
            f"dataset {ast.source!r} has {field.ndim} axes; slice or "
            f"project it down to 3 first",
        )
    try:
        session, view_id = add_view(session, ast.source, cell=ast.cell)
    except ValueError as e:
        raise EvalError("bad-cell", str(e)) from None
    return session, [{"event": "viewAdded", "viewId": view_id}]


def _eval_view_remove(session, ast, env):
    _require_view(session, ast.view_id)
    return remove_view(session, ast.view_id), [
        {"event": "viewRemoved", "viewId": ast.view_id}
    ]


def _eval_iso_add(session, ast, env):
    view = _require_view(session, ast.view_id)
    if ast.level not in view.iso_levels:
        view = View(**{**view.__dict__, "iso_levels": view.iso_levels + (ast.level,)})
        session = replace_view(session, view)
    return session, [_view_changed(ast.view_id)]


def _eval_iso_remove(session, ast, env):
    view = _require_view(session, ast.view_id)
    if ast.level is None:
        levels = ()
    else:
        if ast.level not in view.iso_levels:
            raise EvalError(
                "unknown-iso", f"view {ast.view_id} has no isosurface at {ast.level}"
            )
        levels = tuple(l for l in view.iso_levels if l != ast.level)
    session = replace_view(session, View(**{**view.__dict__, "iso_levels": levels}))
    return session, [_view_changed(ast.view_id)]


def _eval_cut_add(session, ast, env):
    view = _require_view(session, ast.view_id)
    offset = None if ast.offset == "center" else float(ast.offset)
    if ast.axis is not None:
        from .session import view_field

        axis = _resolve_axis(view_field(session, view), ast.axis)
        plane = CutPlane(axis=axis, offset=offset)
    else:
        try:
            normal = vnormalize(tuple(float(c) for c in ast.normal))
        except ValueError:
            raise EvalError("bad-normal", "cut plane normal must be non-zero") from None
        plane = CutPlane(normal=normal, offset=offset)
    view = View(**{**view.__dict__, "cut_planes": view.cut_planes + (plane,)})
    return replace_view(session, view), [_view_changed(ast.view_id)]


def _with_palette(tf: TransferFunction, name: str) -> TransferFunction:
    lo, hi = tf.scalar_range
    colors = tuple((lo + t * (hi - lo), rgb) for t, rgb in PALETTES[name])
    return TransferFunction(colors, tf.opacity_points, palette_name=name)


def _eval_palette_set(session, ast, env):
    if ast.name not in PALETTES:
        raise EvalError(
            "unknown-palette",
            f"unknown palette {ast.name!r}; expected one of {sorted(PALETTES)}",
        )
    events = []
    for view in _target_views(session, ast.view_id):
        tf = _with_palette(view.tf, ast.name)
        session = replace_view(session, View(**{**view.__dict__, "tf": tf}))
        events.append(_view_changed(view.id))
    return session, events


def _eval_opacity_set(session, ast, env):
    events = []
    for view in _target_views(session, ast.view_id):
        try:
            tf = TransferFunction(
                view.tf.color_points, ast.points, palette_name=view.tf.palette_name
            )
        except ValueError as e:
            raise EvalError("bad-opacity", str(e)) from None
        session = replace_view(session, View(**{**view.__dict__, "tf": tf}))
        events.append(_view_changed(view.id))
    return session, events


def _eval_range_set(session, ast, env):
    view = _require_view(session, ast.view_id)
    if not ast.lo < ast.hi:
        raise EvalError("bad-range", f"range needs min < max, got {ast.lo}..{ast.hi}")
    view = View(**{**view.__dict__, "window": (float(ast.lo), float(ast.hi))})
    return replace_view(session, view), [_view_changed(ast.view_id)]


def _eval_hist_show(session, ast, env):
    from .session import view_field

    view = _require_view(session, ast.view_id)
    try:
        h = histogram(view_field(session, view), ast.bins)
    except ValueError as e:
        raise EvalError("empty-data", str(e)) from None
    view = View(**{**view.__dict__, "show_histogram": True, "hist_bins": ast.bins})
    session = replace_view(session, view)
    return session, [
        {
            "event": "histogram",
            "viewId": ast.view_id,
            "edges": [float(e) for e in h.bin_edges],
            "counts": [int(c) for c in h.counts],
        }
    ]


def _eval_colorbar_show(session, ast, env):
    view = _require_view(session, ast.view_id)
    view = View(**{**view.__dict__, "show_colorbar": True})
    return replace_view(session, view), [_view_changed(ast.view_id)]


def _eval_mode(session, ast, env):
    return set_mode(session, ast.mode), [{"event": "modeChanged", "mode": ast.mode}]


def _eval_camera_set(session, ast, env):
    cam = session.camera
    try:
        cam = Camera(
            position=ast.position or cam.position,
            focal_point=ast.focal or cam.focal_point,
            view_up=ast.up or cam.view_up,
            vertical_fov_degrees=ast.fov if ast.fov is not None else cam.vertical_fov_degrees,
        )
    except ValueError as e:
        raise EvalError("bad-camera", str(e)) from None
    from dataclasses import replace as _replace

    return _replace(session, camera=cam), [{"event": "cameraChanged"}]


def _eval_anim(session, ast, env):
    try:
        snapshots = animate(session, ast.kind, ast.axis, ast.degrees, ast.frames)
    except ValueError as e:
        raise EvalError("bad-animation", str(e)) from None
    return snapshots[-1], [
        {"event": "animation", "kind": ast.kind, "frames": ast.frames}
    ]


def _eval_snapshot(session, ast, env):
    size = None if ast.size is None else [ast.size[0], ast.size[1]]
    return session, [{"event": "snapshot", "path": ast.path, "size": size}]


def _eval_source(session, ast, env):
    if env.read_text is None:
        raise EvalError("no-io", "no script reader configured")
    try:
        text = env.read_text(ast.path)
    except OSError as e:
        raise EvalError("io-error", f"cannot read {ast.path!r}: {e}") from None
    session, events, errors = run_script(session, text, env)
    for line, err in errors:
        events.append(
            {"event": "scriptError", "path": ast.path, "line": line, "message": str(err)}
        )
    return session, events


def _eval_layout(session, ast, env):
    try:
        layout = LayoutSpec(
            cols=ast.cols, cell_width=float(ast.cell_w), cell_height=float(ast.cell_h)
        )
        session = set_layout(session, layout)
    except ValueError as e:
        raise EvalError("bad-layout", str(e)) from None
    return session, [{"event": "layoutChanged", "cols": ast.cols}]


_HANDLERS = {
    lang.Load: _eval_load,
    lang.Synth: _eval_synth,
    lang.Slice: _eval_slice,
    lang.Project: _eval_project,
    lang.Filter: _eval_filter,
    lang.ViewAdd: _eval_view_add,
    lang.ViewRemove: _eval_view_remove,
    lang.IsoAdd: _eval_iso_add,
    lang.IsoRemove: _eval_iso_remove,
    lang.CutAdd: _eval_cut_add,
    lang.PaletteSet: _eval_palette_set,
    lang.OpacitySet: _eval_opacity_set,
    lang.RangeSet: _eval_range_set,
    lang.HistShow: _eval_hist_show,
    lang.ColorbarShow: _eval_colorbar_show,
    lang.Mode: _eval_mode,
    lang.CameraSet: _eval_camera_set,
    lang.Anim: _eval_anim,
    lang.Snapshot: _eval_snapshot,
    lang.Source: _eval_source,
    lang.Layout: _eval_layout,
}

_EMPTY_ENV = Environment()


def evaluate(
    session: Session, ast: lang.CommandAst, env: Environment | None = None
) -> tuple[Session, list[dict]]:
    """Apply one command; returns (new session, events) or raises EvalError."""
    handler = _HANDLERS.get(type(ast))
    if handler is None:
        raise EvalError("unknown-command", f"no handler for {type(ast).__name__}")
    return handler(session, ast, env or _EMPTY_ENV)


def run_script(
    session: Session,
    text: str,
    env: Environment | None = None,
    strict: bool = False,
) -> tuple[Session, list[dict], list[tuple[int, Exception]]]:
    """Evaluate a script line by line, skipping failed lines.

    Returns the final session, all events in order, and (line, error)
    pairs for every line that failed to parse or apply.  With strict=True
    the first error stops the run (the session reflects the lines before
    it).
    """
    events: list[dict] = []
    errors: list[tuple[int, Exception]] = []
    for lineno, parsed in lang.parse_script(text):
        if isinstance(parsed, lang.ParseError):
            errors.append((lineno, parsed))
            if strict:
                break
            continue
        try:
            session, line_events = evaluate(session, parsed, env)
        except EvalError as e:
            errors.append((lineno, e))
            if strict:
                break
            continue
        events.extend(line_events)
    return session, events, errors
