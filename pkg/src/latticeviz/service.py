"""Live session service: one shared session, many WebSocket clients.

Clients connect to ``/session`` and exchange JSON text messages; client
messages are::

    {"type": "command",       "text": "iso add view=0 level=0.005"}
    {"type": "pointer",       "kind": "rotateDrag", "dx": .., "dy": ..,
                              "targetView": id?}
    {"type": "key",           "char": "c"}
    {"type": "requestScene"}
    {"type": "requestRender", "viewId": id, "width": w, "height": h}

Server messages are ``sceneDelta`` (events + sessionVersion + the full
scene document), ``mesh`` (header announcing a binary frame), ``sliceData``,
``volumeFrame``, ``histogram``, ``error``, and ``ack``.  Binary mesh
frames follow their header on the same connection as separate binary
messages (u32 vertexCount, u32 triangleCount, f32 xyz, u32 indices,
little-endian).

One asyncio lock owns the session: client messages are applied one at a
time, each applied mutation bumps ``sessionVersion`` and broadcasts the
same sceneDelta to every client, and all sends happen under the lock, so
versions arrive in order on every connection.  Malformed or failing
messages are answered with an ``error`` to the sender only and leave the
session untouched.  Unknown JSON fields are ignored.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass, field as dataclass_field

from fastapi import FastAPI, WebSocket
from fastapi.responses import HTMLResponse
from starlette.websockets import WebSocketDisconnect

from . import language as lang
from .evaluator import EvalError, Environment, evaluate
from .field import histogram
from .gateway import (
    KEY_MODES,
    RENDER_CAP,
    default_environment,
    image_payload,
    mesh_frame_bytes,
    render_view,
)
from .geometry import extract_cut_plane, marching_cubes
from .render import image_from_float
from .session import (
    PointerEvent,
    Session,
    handle_pointer,
    new_session,
    session_to_doc,
    set_mode,
    view_field,
)

_FALLBACK_PAGE = """<!doctype html>
<title>lattice viewer</title>
<p>The session service is running. Connect a client to
<code>/session</code> or serve the browser UI with <code>--ui DIR</code>.</p>
"""


@dataclass(eq=False)
class SessionHub:
    """The single shared session plus everything needed to serve it."""

    env: Environment
    session: Session
    version: int = 0
    binary_ref: int = 0
    clients: list[WebSocket] = dataclass_field(default_factory=list)
    lock: asyncio.Lock = dataclass_field(default_factory=asyncio.Lock)


async def _send(ws: WebSocket, message: dict) -> None:
    await ws.send_text(json.dumps(message))


async def _broadcast(hub: SessionHub, message: dict) -> None:
    text = json.dumps(message)
    dead = []
    for client in hub.clients:
        try:
            await client.send_text(text)
        except Exception:
            dead.append(client)
    for client in dead:
        hub.clients.remove(client)


def _scene_delta(hub: SessionHub, events: list[dict]) -> dict:
    return {
        "type": "sceneDelta",
        "sessionVersion": hub.version,
        "events": events,
        "scene": session_to_doc(hub.session),
    }


def _error(message: str, origin: str) -> dict:
    return {"type": "error", "message": message, "origin": origin}


def _touched_views(session: Session, events: list[dict]) -> list[int]:
    """View ids whose renderable content the events may have changed."""
    ids = set()
    for ev in events:
        if ev["event"] in ("viewAdded", "viewChanged"):
            ids.add(ev["viewId"])
        elif ev["event"] == "datasetChanged":
            ids.update(v.id for v in session.views if v.source == ev["name"])
    live = {v.id for v in session.views}
    return sorted(ids & live)


def _slice_payload(field, plane, tf) -> dict | None:
    try:
        img = extract_cut_plane(field, plane, 1.0 / min(field.spacing))
    except ValueError:
        return None
    rgb = tf.color(img.samples).reshape(img.height, img.width, 3)
    alpha = img.sample_mask.reshape(img.height, img.width).astype(float)
    payload = image_payload(image_from_float(rgb, alpha))
    payload["frame"] = {
        "origin": list(img.frame.origin),
        "stepU": list(img.frame.step_u),
        "stepV": list(img.frame.step_v),
    }
    return payload


async def _send_view_content(
    hub: SessionHub, view_id: int, targets: list[WebSocket]
) -> None:
    """Ship meshes and cut-plane textures for one view to ``targets``."""
    view = hub.session.view_by_id(view_id)
    data = view_field(hub.session, view)
    for level in view.iso_levels:
        mesh = marching_cubes(data, level)
        hub.binary_ref += 1
        header = {
            "type": "mesh",
            "viewId": view_id,
            "level": level,
            "binaryRef": hub.binary_ref,
        }
        frame = mesh_frame_bytes(mesh)
        for ws in list(targets):
            await _send(ws, header)
            await ws.send_bytes(frame)
    for index, plane in enumerate(view.cut_planes):
        payload = _slice_payload(data, plane, view.tf)
        if payload is None:
            continue
        message = {
            "type": "sliceData",
            "viewId": view_id,
            "planeIndex": index,
            "image": payload,
        }
        for ws in list(targets):
            await _send(ws, message)


def _pointer_scene_events(session: Session, ev: PointerEvent) -> list[dict]:
    if session.mode == "camera":
        return [{"event": "cameraChanged"}]
    if session.mode == "object":
        return [{"event": "viewChanged", "viewId": ev.target_view}]
    return [{"event": "viewChanged", "viewId": v.id} for v in session.views]


async def _on_command(hub: SessionHub, ws: WebSocket, msg: dict) -> None:
    text = msg.get("text")
    if not isinstance(text, str):
        await _send(ws, _error("command needs a string 'text' field", "protocol"))
        return
    async with hub.lock:
        try:
            ast = lang.parse(text)
            hub.session, events = evaluate(hub.session, ast, hub.env)
        except (lang.ParseError, EvalError) as e:
            await _send(ws, _error(str(e), "command"))
            return
        hub.version += 1
        await _broadcast(hub, _scene_delta(hub, events))
        for ev in events:
            if ev["event"] == "histogram":
                await _broadcast(
                    hub,
                    {
                        "type": "histogram",
                        "viewId": ev["viewId"],
                        "edges": ev["edges"],
                        "counts": ev["counts"],
                    },
                )
        for vid in _touched_views(hub.session, events):
            await _send_view_content(hub, vid, hub.clients)


async def _on_pointer(hub: SessionHub, ws: WebSocket, msg: dict) -> None:
    kind = msg.get("kind")
    dx, dy = msg.get("dx"), msg.get("dy")
    target = msg.get("targetView")
    if (
        not isinstance(kind, str)
        or not isinstance(dx, (int, float))
        or not isinstance(dy, (int, float))
        or not (target is None or isinstance(target, int))
    ):
        await _send(ws, _error("pointer needs kind, dx, dy (+targetView?)", "protocol"))
        return
    try:
        event = PointerEvent(kind, (float(dx), float(dy)), target)
    except ValueError as e:
        await _send(ws, _error(str(e), "pointer"))
        return
    async with hub.lock:
        try:
            moved = handle_pointer(hub.session, event)
        except (KeyError, ValueError) as e:
            await _send(ws, _error(str(e), "pointer"))
            return
        if moved is hub.session:
            await _send(ws, {"type": "ack", "sessionVersion": hub.version})
            return
        events = _pointer_scene_events(hub.session, event)
        hub.session = moved
        hub.version += 1
        await _broadcast(hub, _scene_delta(hub, events))


async def _on_key(hub: SessionHub, ws: WebSocket, msg: dict) -> None:
    char = msg.get("char")
    if not isinstance(char, str):
        await _send(ws, _error("key needs a string 'char' field", "protocol"))
        return
    mode = KEY_MODES.get(char)
    if mode is None:
        # "u" and anything unbound: acknowledged no-op.
        await _send(ws, {"type": "ack", "sessionVersion": hub.version})
        return
    async with hub.lock:
        hub.session = set_mode(hub.session, mode)
        hub.version += 1
        await _broadcast(hub, _scene_delta(hub, [{"event": "modeChanged", "mode": mode}]))


async def _on_request_scene(hub: SessionHub, ws: WebSocket, msg: dict) -> None:
    async with hub.lock:
        await _send(ws, _scene_delta(hub, [{"event": "scene"}]))
        for view in hub.session.views:
            await _send_view_content(hub, view.id, [ws])
            if view.show_histogram:
                try:
                    h = histogram(view_field(hub.session, view), view.hist_bins)
                except ValueError:
                    continue
                await _send(
                    ws,
                    {
                        "type": "histogram",
                        "viewId": view.id,
                        "edges": [float(e) for e in h.bin_edges],
                        "counts": [int(c) for c in h.counts],
                    },
                )


async def _on_request_render(hub: SessionHub, ws: WebSocket, msg: dict) -> None:
    vid = msg.get("viewId")
    width, height = msg.get("width"), msg.get("height")
    if not all(isinstance(v, int) for v in (vid, width, height)):
        await _send(
            ws, _error("requestRender needs viewId, width, height", "protocol")
        )
        return
    width = max(1, min(RENDER_CAP, width))
    height = max(1, min(RENDER_CAP, height))
    async with hub.lock:
        try:
            img = render_view(hub.session, vid, (width, height))
        except KeyError:
            await _send(ws, _error(f"no view with id {vid}", "requestRender"))
            return
        await _send(
            ws, {"type": "volumeFrame", "viewId": vid, "image": image_payload(img)}
        )


_HANDLERS = {
    "command": _on_command,
    "pointer": _on_pointer,
    "key": _on_key,
    "requestScene": _on_request_scene,
    "requestRender": _on_request_render,
}


async def _handle_text(hub: SessionHub, ws: WebSocket, raw: str) -> None:
    try:
        msg = json.loads(raw)
    except ValueError as e:
        await _send(ws, _error(f"malformed message: {e}", "protocol"))
        return
    if not isinstance(msg, dict):
        await _send(ws, _error("message must be a JSON object", "protocol"))
        return
    handler = _HANDLERS.get(msg.get("type"))
    if handler is None:
        await _send(ws, _error(f"unknown message type {msg.get('type')!r}", "protocol"))
        return
    await handler(hub, ws, msg)


def create_app(data_dir: str | None = None, ui_dir: str | None = None) -> FastAPI:
    """Build the service around one fresh session.

    ``data_dir`` roots dataset and script paths; ``ui_dir``, when given,
    is served as static files at ``/`` (the browser client build).
    """
    app = FastAPI()
    hub = SessionHub(env=default_environment(data_dir), session=new_session())
    app.state.hub = hub

    @app.websocket("/session")
    async def session_socket(ws: WebSocket) -> None:
        await ws.accept()
        hub.clients.append(ws)
        try:
            await _send(ws, {"type": "ack", "sessionVersion": hub.version})
            while True:
                message = await ws.receive()
                if message["type"] == "websocket.disconnect":
                    break
                raw = message.get("text")
                if raw is None:
                    await _send(
                        ws, _error("binary client messages are not accepted", "protocol")
                    )
                    continue
                await _handle_text(hub, ws, raw)
        except WebSocketDisconnect:
            pass
        finally:
            if ws in hub.clients:
                hub.clients.remove(ws)

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:

        @app.get("/")
        async def index() -> HTMLResponse:
            return HTMLResponse(_FALLBACK_PAGE)

    return app
