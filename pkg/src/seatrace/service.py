"""HTTP/WebSocket service for interactive water-parameter tuning.

A session caches one in-air RGB-D pair (rendered from a scene once at
creation, or uploaded) and re-applies only the water model on every
parameter update, so slider latency is independent of scene complexity.
Previews are addressed by monotonically increasing tokens: the client can
always tell which parameter set a preview belongs to and drop stale ones.

Sessions live in memory only; the durable artifact is the saved config.
"""

from __future__ import annotations

import base64
import threading
import time
import uuid
from collections import OrderedDict
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, Response

from . import imgio
from .camera import (CameraIntrinsics, ImagePair, LightConfig, WaterColumnParams,
                     apply_water_effects, render_in_air, water_params_from_dict,
                     water_preset, save_water_params, DEFAULT_MAX_WATER_RANGE)
from .errors import ConfigError, SimError
from .pose import Pose
from .scene import load_scene

_PREVIEW_CACHE = 8  # PNGs kept per session; older tokens 404


class TuningSession:
    def __init__(self, pair: ImagePair, params: WaterColumnParams,
                 max_water_range: float):
        self.id = uuid.uuid4().hex[:12]
        self.pair = pair
        self.params = params
        self.max_water_range = max_water_range
        self.lock = threading.Lock()
        self.counter = 0
        self.latest_token = None
        self.previews = OrderedDict()  # token -> PNG bytes

    def render_preview(self, params: WaterColumnParams):
        """Apply the water model, cache the PNG, return (token, latency_ms)."""
        start = time.perf_counter()
        wet = apply_water_effects(self.pair, params,
                                  no_hit_depth=self.max_water_range)
        png = imgio.png_bytes(wet, compress_level=1)  # latency over size here
        latency_ms = (time.perf_counter() - start) * 1000.0
        with self.lock:
            self.params = params
            self.counter += 1
            token = f"p{self.counter}"
            self.previews[token] = png
            self.latest_token = token
            while len(self.previews) > _PREVIEW_CACHE:
                self.previews.popitem(last=False)
        return token, latency_ms


def _pair_from_upload(doc: dict) -> ImagePair:
    try:
        rgb = imgio.png_to_array(base64.b64decode(doc["rgb_png_base64"]))
        depth = imgio.depth_from_bytes(base64.b64decode(doc["depth_base64"]),
                                       source="uploaded depth")
    except (KeyError, ValueError, SimError) as exc:
        raise ConfigError(f"bad upload: {exc}") from exc
    if rgb.ndim != 3 or rgb.shape[:2] != depth.shape:
        raise ConfigError(
            f"uploaded rgb shape {rgb.shape[:2]} does not match depth shape {depth.shape}")
    return ImagePair(rgb, depth)


def _pair_from_scene(doc: dict) -> ImagePair:
    scene_path = doc["scene"]
    if not Path(scene_path).is_file():
        raise ConfigError(f"scene file not found: {scene_path}")
    pose_doc = doc.get("pose", {})
    pose = Pose(np.asarray(pose_doc.get("position", (0.0, 0.0, 0.0)), dtype=np.float64),
                tuple(pose_doc.get("orientation", (1.0, 0.0, 0.0, 0.0))))
    intr_doc = doc.get("intrinsics", {})
    intr = CameraIntrinsics.simple(int(intr_doc.get("width", 640)),
                                   int(intr_doc.get("height", 480)),
                                   float(intr_doc.get("hfov_deg", 60.0)))
    light_doc = doc.get("light", {})
    light = LightConfig(
        direction=tuple(light_doc.get("direction", (0.0, 0.0, -1.0))),
        intensity=float(light_doc.get("intensity", 0.8)),
        ambient=float(light_doc.get("ambient", 0.2)),
        background=tuple(light_doc.get("background", (0.0, 0.0, 0.0))))
    scene = load_scene(scene_path)
    return render_in_air(scene, pose, intr, light)


def _params_from_message(doc: dict, current: WaterColumnParams) -> WaterColumnParams:
    merged = current.to_dict()
    if "preset" in doc:
        merged = {"preset": doc["preset"]}
    for key in ("beta_attn", "beta_bs", "B_inf"):
        if key in doc:
            merged[key] = doc[key]
    return water_params_from_dict(merged, source="params message")


def create_app(static_dir=None) -> FastAPI:
    app = FastAPI(title="water tuning service")
    sessions: dict[str, TuningSession] = {}

    def get_session(session_id: str) -> TuningSession:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
        return session

    @app.post("/sessions")
    def create_session(doc: dict):
        try:
            if "scene" in doc:
                pair = _pair_from_scene(doc)
            elif "rgb_png_base64" in doc:
                pair = _pair_from_upload(doc)
            else:
                raise ConfigError("session source must be 'scene' or 'rgb_png_base64'")
            params = water_params_from_dict(doc["params"], source="params") \
                if "params" in doc else water_preset("clear")
        except SimError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        session = TuningSession(
            pair, params,
            float(doc.get("max_water_range", DEFAULT_MAX_WATER_RANGE)))
        sessions[session.id] = session
        token, latency_ms = session.render_preview(params)
        h, w = pair.shape
        return {"session_id": session.id, "width": w, "height": h,
                "params": params.to_dict(),
                "preview_token": token, "latency_ms": latency_ms}

    @app.get("/sessions/{session_id}/state")
    def session_state(session_id: str):
        session = get_session(session_id)
        with session.lock:
            h, w = session.pair.shape
            return {"session_id": session.id, "width": w, "height": h,
                    "params": session.params.to_dict(),
                    "preview_token": session.latest_token}

    @app.get("/sessions/{session_id}/preview.png")
    def preview(session_id: str, token: str = None):
        session = get_session(session_id)
        with session.lock:
            token = token or session.latest_token
            png = session.previews.get(token)
        if png is None:
            raise HTTPException(status_code=404, detail=f"no preview for token {token!r}")
        return Response(content=png, media_type="image/png")

    @app.post("/sessions/{session_id}/save")
    def save(session_id: str, doc: dict):
        session = get_session(session_id)
        if "path" not in doc:
            raise HTTPException(status_code=400, detail="body needs 'path'")
        with session.lock:
            params = session.params  # snapshot: later updates don't touch the file
        try:
            save_water_params(params, doc["path"])
        except OSError as exc:
            raise HTTPException(status_code=400, detail=f"cannot write: {exc}")
        return {"saved": doc["path"], "params": params.to_dict()}

    @app.websocket("/sessions/{session_id}/params")
    async def params_socket(ws: WebSocket, session_id: str):
        await ws.accept()
        session = sessions.get(session_id)
        if session is None:
            await ws.send_json({"error": f"no session {session_id}"})
            await ws.close()
            return
        try:
            while True:
                doc = await ws.receive_json()
                try:
                    params = _params_from_message(doc, session.params)
                except SimError as exc:
                    await ws.send_json({"error": str(exc)})
                    continue
                token, latency_ms = session.render_preview(params)
                await ws.send_json({"preview_token": token,
                                    "latency_ms": latency_ms})
        except WebSocketDisconnect:
            return

    if static_dir is not None and Path(static_dir).is_dir():
        static_root = Path(static_dir)

        @app.get("/")
        def index():
            return FileResponse(static_root / "index.html")

        @app.get("/assets/{name}")
        def asset(name: str):
            target = (static_root / name).resolve()
            if static_root.resolve() not in target.parents or not target.is_file():
                raise HTTPException(status_code=404, detail=name)
            return FileResponse(target)

    return app
