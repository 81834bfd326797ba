"""Network hosting for the teleop loop: a FastAPI app exposing the websocket
protocol, a 20 Hz telemetry broadcast, static hosting of the operator UI
bundle, and the real-time-paced control thread.

The control thread owns the simulation and never touches the network; slow or
dead clients only ever lose telemetry frames (their outbound queues are
bounded and latest-wins), they cannot stall the loop.
"""

from __future__ import annotations

import asyncio
import json
import socket
import threading
import time
from contextlib import asynccontextmanager, suppress
from pathlib import Path

import uvicorn
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse
from fastapi.staticfiles import StaticFiles

from .config import AppConfig, config_to_dict
from .episodes import EpisodeWriter, start_meta
from .errors import PortInUse
from .teleop import EpisodeStart, EpisodeStop, TeleopHub, TeleopLoop

TELEMETRY_HZ = 20.0
_MAX_QUEUED_FRAMES = 4  # per client; beyond this, telemetry frames are dropped

_PLACEHOLDER_PAGE = """<!doctype html>
<title>casterbase</title>
<p>The operator UI bundle is not built. Build it with
<code>npm install &amp;&amp; npm run build</code> in <code>frontend/</code>,
then restart <code>casterbase serve</code>.</p>
<p>The teleop websocket is live at <code>/ws</code>.</p>
"""


class ServeApp:
    """Owns the teleop loop, its pacing thread, and the telemetry snapshot."""

    def __init__(self, cfg: AppConfig, ui_dir: str | Path | None = None, realtime: bool = True):
        self.cfg = cfg
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.realtime = realtime
        self.hub = TeleopHub(
            watchdog_s=cfg.teleop.watchdog_ms / 1000.0,
            gain=cfg.teleop.gain,
            config_payload=config_to_dict(cfg),
        )
        self.tl = TeleopLoop(
            cfg.base,
            cfg.sim,
            cfg.gains,
            hub=self.hub,
            stop_decay_s=cfg.teleop.stop_decay_s,
        )
        self.recording_name: str | None = None
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._telemetry_lock = threading.Lock()
        self._telemetry = self._build_telemetry()
        self._clients: dict[int, asyncio.Queue[str]] = {}

    # -- control thread -------------------------------------------------------

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="control-loop", daemon=True)
        self._thread.start()

    def shutdown(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        self._close_recorder()

    def _run(self) -> None:
        dt = self.tl.loop.dt
        deadline = time.monotonic()
        while not self._stop.is_set():
            self.tl.tick()
            self._apply_episode_event()
            with self._telemetry_lock:
                self._telemetry = self._build_telemetry()
            if self.realtime:
                deadline += dt
                delay = deadline - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:  # fell behind; rebase instead of spiraling
                    deadline = time.monotonic()

    def _apply_episode_event(self) -> None:
        ev = self.tl.pending_episode
        if isinstance(ev, EpisodeStart):
            self._close_recorder()
            stamp = time.strftime("%Y%m%d-%H%M%S", time.gmtime())
            path = Path(self.cfg.paths.episode_dir) / f"{ev.name}-{stamp}.jsonl"
            meta = start_meta(self.tl, config_to_dict(self.cfg), ev.name)
            self.tl.recorder = EpisodeWriter(path, meta)
            self.recording_name = ev.name
        elif isinstance(ev, EpisodeStop):
            self._close_recorder()

    def _close_recorder(self) -> None:
        if self.tl.recorder is not None:
            self.tl.recorder.close()
            self.tl.recorder = None
        self.recording_name = None

    def _build_telemetry(self) -> dict:
        loop = self.tl.loop
        odom = loop.odom.pose
        truth = loop.sim.state.truth_pose
        return {
            "type": "telemetry",
            "t": loop.time,
            "odom_pose": list(odom.as_tuple()),
            "truth_pose": list(truth.as_tuple()),
            "target_pose": list(loop.target.as_tuple()),
            "steer_angles": [j.phi for j in loop.last_joints],
            "commanded_twist": list(loop.prev_cmd.as_tuple()),
            "mode": loop.mode.value,
            "clutch_engaged": self.hub.clutch_engaged(),
            "estop": self.tl.estop,
            "watchdog_stopped": self.tl.stopping,
            "fk_residual": loop.last_residual,
            "protocol_errors": self.hub.protocol_errors,
            "recording": self.recording_name,
        }

    def telemetry_frame(self) -> str:
        with self._telemetry_lock:
            return json.dumps(self._telemetry)

    # -- client bookkeeping (event-loop thread only) --------------------------

    def register_client(self, session_id: int) -> asyncio.Queue[str]:
        q: asyncio.Queue[str] = asyncio.Queue()
        self._clients[session_id] = q
        return q

    def unregister_client(self, session_id: int) -> None:
        self._clients.pop(session_id, None)

    def broadcast(self, frame: str) -> None:
        for q in self._clients.values():
            if q.qsize() < _MAX_QUEUED_FRAMES:  # drop telemetry for slow readers
                q.put_nowait(frame)


def build_app(serve_app: ServeApp) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        serve_app.start()
        task = asyncio.create_task(_broadcaster(serve_app))
        try:
            yield
        finally:
            task.cancel()
            with suppress(asyncio.CancelledError):
                await task
            serve_app.shutdown()

    app = FastAPI(lifespan=lifespan)

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        session = serve_app.hub.connect(now=serve_app.tl.time)
        sid = session.session_id
        queue = serve_app.register_client(sid)

        async def receiver() -> None:
            while True:
                text = await ws.receive_text()
                reply = serve_app.hub.handle(sid, text, now=serve_app.tl.time)
                if reply is not None:
                    queue.put_nowait(json.dumps(reply))

        async def sender() -> None:
            while True:
                await ws.send_text(await queue.get())

        tasks = {asyncio.create_task(receiver()), asyncio.create_task(sender())}
        try:
            done, pending = await asyncio.wait(tasks, return_when=asyncio.FIRST_COMPLETED)
            for t in pending:
                t.cancel()
                with suppress(asyncio.CancelledError, WebSocketDisconnect, RuntimeError):
                    await t
            for t in done:  # retrieve the (expected) disconnect exception
                with suppress(WebSocketDisconnect, RuntimeError):
                    t.result()
        except WebSocketDisconnect:
            pass
        finally:
            for t in tasks:
                t.cancel()
            serve_app.unregister_client(sid)
            serve_app.hub.disconnect(sid)

    if serve_app.ui_dir is not None and serve_app.ui_dir.is_dir():
        app.mount("/", StaticFiles(directory=serve_app.ui_dir, html=True), name="ui")
    else:

        @app.get("/")
        async def placeholder() -> HTMLResponse:
            return HTMLResponse(_PLACEHOLDER_PAGE)

    return app


async def _broadcaster(serve_app: ServeApp) -> None:
    period = 1.0 / TELEMETRY_HZ
    while True:
        serve_app.broadcast(serve_app.telemetry_frame())
        await asyncio.sleep(period)


def _ensure_port_free(host: str, port: int) -> None:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as e:
        raise PortInUse(f"port {port} on {host} is already in use") from e
    finally:
        probe.close()


def serve(cfg: AppConfig, ui_dir: str | Path | None = None, host: str = "127.0.0.1") -> None:
    """Run the service until interrupted; raises PortInUse up front."""
    _ensure_port_free(host, cfg.teleop.port)
    app = build_app(ServeApp(cfg, ui_dir=ui_dir))
    uvicorn.run(app, host=host, port=cfg.teleop.port, log_level="warning")
