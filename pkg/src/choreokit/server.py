"""Live operator service: one control loop, many watching consoles.

The control loop (a SimSession stepped on a background thread) is the
only place performance state changes. Network sessions talk to it
through two one-way channels: a locked command path in, a snapshot
fan-out with a drop policy out. Publishing never blocks the loop.

Wire protocol, JSON text frames over one WebSocket at ``/ws?token=``:

  server -> client
    {"type": "snapshot", "tick", "t", "phase", "cue",
     "mode": {"kind", "damping"}, "q": [6], "points": [[x,y,z] x 7],
     "force_avg", "triggered", "paused", "finished", "stop_count"}
    {"type": "ack",  "id", "phase"}
    {"type": "nack", "id", "reason"}
    {"type": "error", "reason"}            # malformed frame
  client -> server
    {"type": "command", "id", "action", "issuer", "client_ts"}

Duplicate command ids are answered from the stored reply without
re-applying. HTTP: GET /health, GET /cuesheet, GET /trajectory/{name},
POST /pose-import plus GET /pose-import/{job} for the async job.
"""

from __future__ import annotations

import asyncio
import json
import math
import threading
import time
import uuid
from dataclasses import dataclass

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from . import __version__
from .errors import ChoreoError, InputError, ProtocolError
from .robot_model import forward_kinematics
from .sequencer import Event, cards_json
from .sim import SimSession
from .trajectory import csv_text

COMMAND_ACTIONS = (
    "start",
    "pause",
    "next",
    "reset_stop",
    "enter_teach",
    "exit_teach",
    "simulate_tap",
)

# start and next are the same machine event: from idle it starts the
# show, while streaming it skips ahead.
_ACTION_EVENTS = {
    "start": "operator_next",
    "next": "operator_next",
    "pause": "operator_pause",
    "reset_stop": "reset",
    "enter_teach": "operator_enter_teach",
    "exit_teach": "operator_exit_teach",
    "simulate_tap": "tap_detected",
}

SNAPSHOT_HZ = 30.0
BACKLOG_LIMIT = 90


@dataclass(frozen=True)
class Command:
    id: str
    action: str
    issuer: str = ""
    client_ts: float = 0.0

    def to_doc(self) -> dict:
        return {
            "type": "command",
            "id": self.id,
            "action": self.action,
            "issuer": self.issuer,
            "client_ts": self.client_ts,
        }

    @classmethod
    def from_doc(cls, doc) -> "Command":
        if not isinstance(doc, dict) or doc.get("type") != "command":
            raise ProtocolError("expected a command frame")
        cmd_id = doc.get("id")
        if not isinstance(cmd_id, str) or not cmd_id:
            raise ProtocolError("command needs a non-empty string id")
        action = doc.get("action")
        if action not in COMMAND_ACTIONS:
            raise ProtocolError(f"unknown action {action!r}")
        issuer = doc.get("issuer", "")
        if not isinstance(issuer, str):
            raise ProtocolError("issuer must be a string")
        try:
            client_ts = float(doc.get("client_ts", 0.0))
        except (TypeError, ValueError):
            raise ProtocolError("client_ts must be a number") from None
        return cls(id=cmd_id, action=action, issuer=issuer, client_ts=client_ts)


@dataclass(frozen=True)
class Ack:
    id: str
    phase: str

    def to_doc(self) -> dict:
        return {"type": "ack", "id": self.id, "phase": self.phase}

    @classmethod
    def from_doc(cls, doc) -> "Ack":
        if doc.get("type") != "ack":
            raise ProtocolError("expected an ack frame")
        return cls(id=str(doc["id"]), phase=str(doc["phase"]))


@dataclass(frozen=True)
class Nack:
    id: str
    reason: str

    def to_doc(self) -> dict:
        return {"type": "nack", "id": self.id, "reason": self.reason}

    @classmethod
    def from_doc(cls, doc) -> "Nack":
        if doc.get("type") != "nack":
            raise ProtocolError("expected a nack frame")
        return cls(id=str(doc["id"]), reason=str(doc["reason"]))


@dataclass(frozen=True)
class Snapshot:
    tick: int
    t: float
    phase: str
    cue: int
    mode_kind: str
    mode_damping: float | None
    q: tuple[float, ...]
    points: tuple[tuple[float, float, float], ...]
    force_avg: float
    triggered: bool
    paused: bool
    finished: bool
    stop_count: int

    def to_doc(self) -> dict:
        return {
            "type": "snapshot",
            "tick": self.tick,
            "t": self.t,
            "phase": self.phase,
            "cue": self.cue,
            "mode": {"kind": self.mode_kind, "damping": self.mode_damping},
            "q": list(self.q),
            "points": [list(p) for p in self.points],
            "force_avg": self.force_avg,
            "triggered": self.triggered,
            "paused": self.paused,
            "finished": self.finished,
            "stop_count": self.stop_count,
        }

    @classmethod
    def from_doc(cls, doc) -> "Snapshot":
        if doc.get("type") != "snapshot":
            raise ProtocolError("expected a snapshot frame")
        return cls(
            tick=int(doc["tick"]),
            t=float(doc["t"]),
            phase=str(doc["phase"]),
            cue=int(doc["cue"]),
            mode_kind=str(doc["mode"]["kind"]),
            mode_damping=doc["mode"]["damping"],
            q=tuple(float(v) for v in doc["q"]),
            points=tuple(tuple(float(v) for v in p) for p in doc["points"]),
            force_avg=float(doc["force_avg"]),
            triggered=bool(doc["triggered"]),
            paused=bool(doc["paused"]),
            finished=bool(doc["finished"]),
            stop_count=int(doc["stop_count"]),
        )


class SnapshotHub:
    """Snapshot fan-out from the control thread to websocket clients.

    publish() only schedules queue puts on each client's event loop and
    returns immediately. A client whose queue backlog is full gets
    marked dropped; its reader then sees None and closes the socket.
    """

    def __init__(self, backlog: int = BACKLOG_LIMIT):
        self._backlog = backlog
        self._lock = threading.Lock()
        self._next_id = 0
        self._queues: dict[int, tuple[asyncio.AbstractEventLoop, asyncio.Queue]] = {}
        self._dropped: set[int] = set()

    def register(self, loop: asyncio.AbstractEventLoop) -> int:
        with self._lock:
            cid = self._next_id
            self._next_id += 1
            self._queues[cid] = (loop, asyncio.Queue(maxsize=self._backlog))
            return cid

    def unregister(self, cid: int) -> None:
        with self._lock:
            self._queues.pop(cid, None)
            self._dropped.discard(cid)

    def client_count(self) -> int:
        with self._lock:
            return len(self._queues)

    def is_dropped(self, cid: int) -> bool:
        with self._lock:
            return cid in self._dropped

    def publish(self, doc: dict) -> None:
        with self._lock:
            targets = [
                (cid, loop, q)
                for cid, (loop, q) in self._queues.items()
                if cid not in self._dropped
            ]
        for cid, loop, q in targets:
            loop.call_soon_threadsafe(self._offer, cid, q, doc)

    def _offer(self, cid: int, q: asyncio.Queue, doc: dict) -> None:
        try:
            q.put_nowait(doc)
        except asyncio.QueueFull:
            with self._lock:
                self._dropped.add(cid)

    async def next_snapshot(self, cid: int) -> dict | None:
        """Next snapshot for this client, or None once it was dropped."""
        with self._lock:
            entry = self._queues.get(cid)
        if entry is None or self.is_dropped(cid):
            return None
        doc = await entry[1].get()
        if self.is_dropped(cid):
            return None
        return doc


class Engine:
    """The control loop: steps one SimSession and fans out snapshots.

    All mutation happens under one lock, so operator commands land
    between ticks and never mid-tick. Duplicate command ids return the
    stored reply without touching the machine.
    """

    def __init__(self, session: SimSession, snapshot_hz: float = SNAPSHOT_HZ):
        self.session = session
        self.hub = SnapshotHub()
        self.snapshot_hz = snapshot_hz
        self._lock = threading.RLock()
        self._results: dict[str, dict] = {}
        self._slot = -1
        self._thread: threading.Thread | None = None
        self._running = threading.Event()

    def submit(self, cmd: Command) -> dict:
        with self._lock:
            if cmd.id in self._results:
                return self._results[cmd.id]
            res = self.session.apply(Event(_ACTION_EVENTS[cmd.action]))
            if res.rejected is None:
                reply = Ack(cmd.id, self.session.state.phase).to_doc()
            else:
                reply = Nack(cmd.id, res.rejected).to_doc()
            self._results[cmd.id] = reply
            return reply

    def register_trajectory(self, name: str, traj) -> None:
        with self._lock:
            self.session.store.register(name, traj)

    def snapshot(self) -> dict:
        with self._lock:
            session = self.session
            state = session.state
            q = tuple(float(v) for v in session.sim.q)
            points = forward_kinematics(session.profile, session.sim.q).p
            return Snapshot(
                tick=session.k,
                t=session.t,
                phase=state.phase,
                cue=state.cue_pos,
                mode_kind=state.mode.kind,
                mode_damping=state.mode.damping,
                q=q,
                points=tuple(tuple(float(v) for v in row) for row in points),
                force_avg=session.force_average,
                triggered=session.triggered,
                paused=state.paused,
                finished=state.finished,
                stop_count=session.stop_count,
            ).to_doc()

    def step(self, n: int = 1) -> None:
        """Advance n control ticks, publishing on 30 Hz slot crossings."""
        for _ in range(n):
            with self._lock:
                self.session.tick_once()
                slot = int(math.floor(self.session.t * self.snapshot_hz + 1e-9))
                publish = slot > self._slot
                if publish:
                    self._slot = slot
                    doc = self.snapshot()
            if publish:
                self.hub.publish(doc)

    def run_background(self, realtime: bool = True) -> None:
        """Step the loop on a daemon thread until shutdown()."""
        if self._thread is not None:
            return
        self._running.set()

        def loop() -> None:
            dt = self.session.dt
            started = time.monotonic()
            behind = 0
            while self._running.is_set():
                if realtime:
                    target = int((time.monotonic() - started) / dt)
                    behind = target - self.session.k
                    if behind <= 0:
                        time.sleep(dt / 4)
                        continue
                self.step(min(max(behind, 1), 50))

        self._thread = threading.Thread(target=loop, name="control-loop", daemon=True)
        self._thread.start()

    def shutdown(self) -> None:
        self._running.clear()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None


def create_app(engine: Engine, *, token: str = "") -> FastAPI:
    """Wire the engine to HTTP and WebSocket endpoints."""
    app = FastAPI(title="choreokit operator service", version=__version__)
    app.state.engine = engine
    app.state.token = token
    app.state.jobs = {}
    app.state.jobs_lock = threading.Lock()

    @app.get("/health")
    def health() -> dict:
        return {"ok": True, "version": __version__, "tick": engine.session.k}

    @app.get("/cuesheet")
    def cuesheet() -> Response:
        # byte-identical to the canonical card serialization
        return Response(
            content=cards_json(engine.session.sheet).encode(),
            media_type="application/json",
        )

    @app.get("/trajectory/{name}")
    def trajectory(name: str) -> Response:
        try:
            traj = engine.session.store.get(name)
        except InputError as exc:
            return JSONResponse({"error": str(exc)}, status_code=404)
        return PlainTextResponse(csv_text(traj), media_type="text/csv")

    @app.post("/pose-import")
    def pose_import(body: dict) -> JSONResponse:
        frames_dir = body.get("frames_dir")
        name = body.get("name")
        if not isinstance(frames_dir, str) or not isinstance(name, str) or not name:
            return JSONResponse(
                {"error": "frames_dir and name are required"}, status_code=400
            )
        try:
            frame_rate = float(body.get("frame_rate", 30.0))
        except (TypeError, ValueError):
            return JSONResponse({"error": "frame_rate must be a number"}, status_code=400)
        side = body.get("side", "auto")
        job_id = uuid.uuid4().hex
        with app.state.jobs_lock:
            app.state.jobs[job_id] = {"status": "pending"}

        def work() -> None:
            from .pose import import_pose_video

            try:
                traj, meta = import_pose_video(
                    frames_dir, frame_rate=frame_rate, side=side
                )
            except ChoreoError as exc:
                with app.state.jobs_lock:
                    app.state.jobs[job_id] = {"status": "error", "reason": str(exc)}
                return
            engine.register_trajectory(name, traj)
            with app.state.jobs_lock:
                app.state.jobs[job_id] = {
                    "status": "done",
                    "trajectory": name,
                    "frames": len(traj),
                    "meta": json.loads(meta.to_json()),
                }

        threading.Thread(target=work, daemon=True).start()
        return JSONResponse({"job": job_id, "status": "pending"})

    @app.get("/pose-import/{job_id}")
    def pose_import_status(job_id: str) -> JSONResponse:
        with app.state.jobs_lock:
            job = app.state.jobs.get(job_id)
        if job is None:
            return JSONResponse({"error": "no such job"}, status_code=404)
        return JSONResponse(job)

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket) -> None:
        if token and websocket.query_params.get("token") != token:
            await websocket.close(code=4401)
            return
        await websocket.accept()
        loop = asyncio.get_running_loop()
        cid = engine.hub.register(loop)
        send_lock = asyncio.Lock()

        async def send(doc: dict) -> None:
            async with send_lock:
                await websocket.send_json(doc)

        async def pump() -> None:
            while True:
                doc = await engine.hub.next_snapshot(cid)
                if doc is None:
                    # fell past the backlog: cut loose, never stall the loop
                    await websocket.close(code=1013)
                    return
                await send(doc)

        # a fresh connection starts from the current state
        await send(engine.snapshot())
        pump_task = asyncio.create_task(pump())
        try:
            while True:
                raw = await websocket.receive_text()
                try:
                    cmd = Command.from_doc(json.loads(raw))
                except json.JSONDecodeError:
                    await send({"type": "error", "reason": "frame is not valid JSON"})
                    continue
                except ProtocolError as exc:
                    await send({"type": "error", "reason": str(exc)})
                    continue
                await send(engine.submit(cmd))
        except WebSocketDisconnect:
            pass
        finally:
            pump_task.cancel()
            engine.hub.unregister(cid)

    return app
