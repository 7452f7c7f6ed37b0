"""Wire protocol for driving sessions and volume exploration remotely.

Protocol version 1. Every message is one JSON object:

    request:  {"v": 1, "seq": N, "session_id": S|null, "op": OP, "args": {...}}
    response: {"v": 1, "seq": N, "session_id": S|null, "ok": true, "result": {...}}
              {"v": 1, "seq": N, "session_id": S|null, "ok": false,
               "error": {"code": C, "message": M}}

``create_session`` opens a session and starts its sequence counter; every
later message for that session must carry a strictly increasing ``seq``.
Session ops: ``advance`` (one state-machine event), ``get_frame`` (scene
render as base64 PNG), ``submit_questionnaire``, ``export``. Volume ops
(``volume_open``, ``volume_render``, ``volume_brush``, ``volume_pick``,
``volume_segment_mask``, ``volume_reset_mask``) drive the masked
ray-caster for the detection/application/comparison flows.

Transports: a message-per-line TCP server, plus an HTTP bridge (POST
/message with the same JSON body) so browsers can participate.
"""

from __future__ import annotations

import json
import socketserver
import threading
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import volume as vol
from .geometry import LEFT, RIGHT, derive_eye_views
from .rasterizer import ray_grid
from .render import HighlightSpec, compose, png_base64, render_eye, render_stereo_pair, LAYOUTS
from .scenes import default_rig
from .session import Event, ProtocolError, QuestionnaireRecord, Session, build_default_plan, export_session

PROTOCOL_VERSION = 1


class ServiceError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class _HostedVolume:
    grid: vol.VolumeGrid
    labels: np.ndarray | None
    mask: vol.MaskVolume
    tf: vol.TransferFunction


@dataclass
class _HostedSession:
    session: Session
    scenes: dict
    last_seq: int
    lock: threading.Lock = field(default_factory=threading.Lock)
    volumes: dict[str, _HostedVolume] = field(default_factory=dict)


class ExperimentService:
    """Transport-independent handler for protocol messages."""

    def __init__(self):
        self._sessions: dict[str, _HostedSession] = {}
        self._registry_lock = threading.Lock()

    # -- plumbing -------------------------------------------------------------

    def handle(self, msg: dict) -> dict:
        seq = msg.get("seq")
        session_id = msg.get("session_id")
        try:
            if msg.get("v") != PROTOCOL_VERSION:
                raise ServiceError("bad_request", f"unsupported protocol version {msg.get('v')!r}")
            if not isinstance(seq, int):
                raise ServiceError("bad_request", "seq must be an integer")
            op = msg.get("op")
            args = msg.get("args") or {}
            if op == "create_session":
                result, session_id = self._create_session(args, seq)
            else:
                hosted = self._hosted(session_id)
                with hosted.lock:
                    if seq <= hosted.last_seq:
                        raise ServiceError(
                            "sequence_error",
                            f"seq {seq} is not greater than the last seen {hosted.last_seq}",
                        )
                    hosted.last_seq = seq
                    result = self._dispatch(hosted, op, args)
            return {"v": PROTOCOL_VERSION, "seq": seq, "session_id": session_id,
                    "ok": True, "result": result}
        except ServiceError as exc:
            return self._error(seq, session_id, exc.code, str(exc))
        except ProtocolError as exc:
            return self._error(seq, session_id, "protocol_error", str(exc))
        except (KeyError, TypeError, ValueError) as exc:
            return self._error(seq, session_id, "bad_request", str(exc))

    def _error(self, seq, session_id, code, message):
        return {"v": PROTOCOL_VERSION, "seq": seq, "session_id": session_id,
                "ok": False, "error": {"code": code, "message": message}}

    def _hosted(self, session_id) -> _HostedSession:
        with self._registry_lock:
            hosted = self._sessions.get(session_id)
        if hosted is None:
            raise ServiceError("unknown_session", f"no session {session_id!r}")
        return hosted

    def _dispatch(self, hosted: _HostedSession, op: str, args: dict):
        ops = {
            "advance": self._advance,
            "get_frame": self._get_frame,
            "submit_questionnaire": self._submit_questionnaire,
            "export": self._export,
            "volume_open": self._volume_open,
            "volume_render": self._volume_render,
            "volume_brush": self._volume_brush,
            "volume_pick": self._volume_pick,
            "volume_segment_mask": self._volume_segment_mask,
            "volume_reset_mask": self._volume_reset_mask,
        }
        handler = ops.get(op)
        if handler is None:
            raise ServiceError("unknown_op", f"unknown op {op!r}")
        return handler(hosted, args)

    # -- session ops ----------------------------------------------------------

    def _create_session(self, args: dict, seq: int):
        participant_id = args["participant_id"]
        seed = int(args["seed"])
        plan = build_default_plan(
            participant_id,
            seed,
            scenes_per_set=int(args.get("scenes_per_set", 48)),
            training_scenes=int(args.get("training_scenes", 20)),
        )
        session_id = uuid.uuid4().hex
        hosted = _HostedSession(session=Session(plan), scenes=plan.scene_index(), last_seq=seq)
        with self._registry_lock:
            self._sessions[session_id] = hosted
        return {"session_id": session_id, "phase": "init", "plan": plan.echo()}, session_id

    def _state(self, session: Session) -> dict:
        return {
            "phase": session.phase,
            "block": session.block_index,
            "trial": session.trial_index,
            "phase_deadline": session.phase_deadline,
        }

    def _advance(self, hosted: _HostedSession, args: dict):
        event = Event.from_dict(args["event"])
        effects = hosted.session.advance(event)
        return {**self._state(hosted.session), "effects": effects}

    def _submit_questionnaire(self, hosted: _HostedSession, args: dict):
        record = QuestionnaireRecord.from_dict(args["record"])
        event = Event("questionnaire_submitted", float(args["t"]), record=record)
        effects = hosted.session.advance(event)
        return {**self._state(hosted.session), "effects": effects}

    def _export(self, hosted: _HostedSession, args: dict):
        return {"jsonl": export_session(hosted.session.log)}

    def _get_frame(self, hosted: _HostedSession, args: dict):
        scene = hosted.scenes.get(args["scene_id"])
        if scene is None:
            raise ServiceError("bad_request", f"unknown scene_id {args['scene_id']!r}")
        size = tuple(args.get("size", (512, 512)))
        time_ms = float(args.get("time_ms", 0.0))
        technique = args.get("technique")
        highlight = None if technique is None else _highlight_from_name(technique, scene)
        rig = default_rig()
        layout = args.get("layout")
        eye = args.get("eye")
        meta = {"scene_id": scene.scene_id, "width": size[0], "height": size[1],
                "set_kind": scene.set_kind}
        if layout is not None:
            if layout not in LAYOUTS:
                raise ServiceError("bad_request", f"unknown layout {layout!r}")
            pair = render_stereo_pair(scene, rig, highlight, time_ms, size)
            image = compose(pair, layout)
            meta.update({"layout": layout, "technique": pair[0].technique,
                         "flicker_phase": pair[0].flicker_phase,
                         "width": image.shape[1], "height": image.shape[0]})
            return {**meta, "png_b64": png_base64(image)}
        if eye not in (LEFT, RIGHT):
            raise ServiceError("bad_request", "get_frame needs eye='left'|'right' or a layout")
        views = derive_eye_views(rig, size)
        view = views[0] if eye == LEFT else views[1]
        frame = render_eye(scene, view, highlight, time_ms, size)
        meta.update({"eye": eye, "technique": frame.technique, "flicker_phase": frame.flicker_phase})
        return {**meta, "png_b64": png_base64(frame.pixels)}

    # -- volume ops -----------------------------------------------------------

    def _volume_open(self, hosted: _HostedSession, args: dict):
        if "phantom" in args:
            dims = tuple(args.get("dims", (64, 64, 64)))
            grid, labels = vol.make_phantom(args["phantom"], dims)
        elif "header_path" in args:
            grid = vol.load_raw_volume(args["header_path"])
            labels = None
        else:
            raise ServiceError("bad_request", "volume_open needs 'phantom' or 'header_path'")
        tf_name = args.get("tf", "greyscale")
        tf = _tf_from_name(tf_name, grid.value_range)
        volume_id = uuid.uuid4().hex[:12]
        hosted.volumes[volume_id] = _HostedVolume(
            grid=grid, labels=labels, mask=vol.MaskVolume.zeros(grid.dims), tf=tf
        )
        segment_ids = [] if labels is None else sorted(int(v) for v in np.unique(labels) if v != 0)
        return {
            "volume_id": volume_id,
            "dims": list(grid.dims),
            "spacing": list(grid.spacing),
            "value_range": list(grid.value_range),
            "segment_ids": segment_ids,
            "tf": tf_name,
        }

    def _volume(self, hosted: _HostedSession, args: dict) -> _HostedVolume:
        hv = hosted.volumes.get(args.get("volume_id"))
        if hv is None:
            raise ServiceError("bad_request", f"unknown volume_id {args.get('volume_id')!r}")
        return hv

    def _volume_views(self, hv: _HostedVolume, args: dict, size):
        return vol.orbit_views(
            hv.grid,
            size,
            azimuth_deg=float(args.get("azimuth_deg", 30.0)),
            elevation_deg=float(args.get("elevation_deg", 15.0)),
            distance=args.get("distance"),
        )

    def _volume_render(self, hosted: _HostedSession, args: dict):
        hv = self._volume(hosted, args)
        size = tuple(args.get("size", (256, 256)))
        deadeye = args.get("deadeye")
        settings = vol.RenderSettings(
            deadeye=deadeye if deadeye in (LEFT, RIGHT) else None,
            step_length=args.get("step_length"),
        )
        views = self._volume_views(hv, args, size)
        layout = args.get("layout")
        if layout is not None:
            if layout not in LAYOUTS:
                raise ServiceError("bad_request", f"unknown layout {layout!r}")
            left = vol.raycast(hv.grid, hv.tf, hv.mask, views[0], settings, size)
            right = vol.raycast(hv.grid, hv.tf, hv.mask, views[1], settings, size)
            image = compose((left, right), layout)
            return {"png_b64": png_base64(image), "layout": layout,
                    "width": image.shape[1], "height": image.shape[0]}
        eye = args.get("eye")
        if eye not in (LEFT, RIGHT):
            raise ServiceError("bad_request", "volume_render needs eye='left'|'right' or a layout")
        view = views[0] if eye == LEFT else views[1]
        frame = vol.raycast(hv.grid, hv.tf, hv.mask, view, settings, size)
        return {"png_b64": png_base64(frame.pixels), "eye": eye,
                "width": frame.width, "height": frame.height}

    def _volume_brush(self, hosted: _HostedSession, args: dict):
        hv = self._volume(hosted, args)
        before = int(hv.mask.bits.sum())
        vol.brush_erase(
            hv.mask,
            center=tuple(float(c) for c in args["center"]),
            radius=float(args["radius"]),
            grid=hv.grid,
            mode=args.get("mode", "set"),
        )
        after = int(hv.mask.bits.sum())
        return {"set_bits": after, "changed": after - before}

    def _volume_pick(self, hosted: _HostedSession, args: dict):
        hv = self._volume(hosted, args)
        size = tuple(args.get("size", (256, 256)))
        views = self._volume_views(hv, args, size)
        eye = args.get("eye", LEFT)
        view = views[0] if eye == LEFT else views[1]
        x_px, y_px = int(args["x_px"]), int(args["y_px"])
        if not (0 <= x_px < size[0] and 0 <= y_px < size[1]):
            raise ServiceError("bad_request", "pick coordinates outside the image")
        direction = ray_grid(view, size)[y_px, x_px]
        world = view.origin_vec() + direction * float(args["depth_mm"])
        return {"world": [float(v) for v in world]}

    def _volume_segment_mask(self, hosted: _HostedSession, args: dict):
        hv = self._volume(hosted, args)
        if hv.labels is None:
            raise ServiceError("bad_request", "volume has no segment labels")
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            hv.mask = vol.mask_from_segment(hv.labels, int(args["segment_id"]))
        found = bool(hv.mask.bits.any())
        return {"set_bits": int(hv.mask.bits.sum()), "found": found}

    def _volume_reset_mask(self, hosted: _HostedSession, args: dict):
        hv = self._volume(hosted, args)
        hv.mask = vol.MaskVolume.zeros(hv.grid.dims)
        return {"set_bits": 0}


def _highlight_from_name(name: str, scene) -> HighlightSpec:
    target = scene.target_index
    if name == "none" or target is None:
        return HighlightSpec.none()
    if name in ("deadeye-left", "deadeye_left"):
        return HighlightSpec.deadeye(LEFT, target)
    if name in ("deadeye-right", "deadeye_right"):
        return HighlightSpec.deadeye(RIGHT, target)
    if name in ("color", "color_popout"):
        return HighlightSpec.color_popout(target)
    if name == "flicker":
        return HighlightSpec.flicker(target)
    raise ServiceError("bad_request", f"unknown technique {name!r}")


def _tf_from_name(name: str, value_range) -> vol.TransferFunction:
    if name == "greyscale":
        return vol.greyscale_transfer_function(value_range)
    if name == "color":
        return vol.color_transfer_function(value_range)
    raise ServiceError("bad_request", f"unknown transfer function {name!r}")


# ---------------------------------------------------------------------------
# transports

class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self):
        while True:
            line = self.rfile.readline()
            if not line:
                break
            line = line.strip()
            if not line:
                continue
            try:
                msg = json.loads(line)
            except json.JSONDecodeError as exc:
                response = {"v": PROTOCOL_VERSION, "seq": None, "session_id": None,
                            "ok": False, "error": {"code": "bad_request", "message": str(exc)}}
            else:
                response = self.server.service.handle(msg)
            self.wfile.write((json.dumps(response) + "\n").encode())
            self.wfile.flush()


class LineProtocolServer(socketserver.ThreadingTCPServer):
    """Message-per-line JSON over TCP."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], service: ExperimentService):
        super().__init__(address, _LineHandler)
        self.service = service


class _HttpHandler(BaseHTTPRequestHandler):
    def _send(self, status: int, body: bytes, content_type="application/json"):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self):
        self._send(204, b"")

    def do_POST(self):
        if self.path != "/message":
            self._send(404, b'{"error": "not found"}')
            return
        length = int(self.headers.get("Content-Length", 0))
        try:
            msg = json.loads(self.rfile.read(length))
        except json.JSONDecodeError as exc:
            self._send(400, json.dumps({"error": str(exc)}).encode())
            return
        response = self.server.service.handle(msg)
        self._send(200, json.dumps(response).encode())

    def do_GET(self):
        if self.path == "/healthz":
            self._send(200, b'{"ok": true}')
            return
        static = self.server.static_dir
        if static is None:
            self._send(404, b'{"error": "not found"}')
            return
        rel = self.path.lstrip("/") or "index.html"
        target = (static / rel).resolve()
        if not str(target).startswith(str(static.resolve())) or not target.is_file():
            self._send(404, b'{"error": "not found"}')
            return
        content_type = {
            ".html": "text/html", ".js": "text/javascript", ".mjs": "text/javascript",
            ".css": "text/css", ".png": "image/png", ".json": "application/json",
        }.get(target.suffix, "application/octet-stream")
        self._send(200, target.read_bytes(), content_type)

    def log_message(self, *args):  # quiet by default
        pass


class HttpBridgeServer(ThreadingHTTPServer):
    """POST /message bridge carrying the same JSON messages, for browsers."""

    daemon_threads = True

    def __init__(self, address: tuple[str, int], service: ExperimentService,
                 static_dir: str | Path | None = None):
        super().__init__(address, _HttpHandler)
        self.service = service
        self.static_dir = Path(static_dir) if static_dir else None


def serve(host: str = "127.0.0.1", tcp_port: int = 8764, http_port: int | None = 8765,
          static_dir=None):
    """Run the TCP protocol server (and HTTP bridge) until interrupted."""
    service = ExperimentService()
    tcp = LineProtocolServer((host, tcp_port), service)
    servers = [tcp]
    if http_port is not None:
        servers.append(HttpBridgeServer((host, http_port), service, static_dir))
    threads = [threading.Thread(target=s.serve_forever, daemon=True) for s in servers]
    for t in threads:
        t.start()
    print(f"line protocol on {host}:{tcp_port}"
          + (f", http bridge on {host}:{http_port}" if http_port else ""))
    try:
        for t in threads:
            t.join()
    except KeyboardInterrupt:
        for s in servers:
            s.shutdown()
