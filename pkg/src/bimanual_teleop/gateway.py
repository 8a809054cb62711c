"""WebSocket gateway: streams session state out, routes commands in.

One asyncio event loop owns everything. The tick task advances the
session at the configured rate with absolute-deadline pacing and
broadcasts every ``decimation``-th state; client handlers run on the
same loop, so they only ever touch the session between ticks (the tick
body never awaits). WebSocket delivery per client is ordered, which
gives commands a well-defined application order.

Backpressure is latest-wins: each client has a one-slot outbound queue.
A slow client silently loses intermediate states; its slot counts the
replacements and the running total rides along in every state message
as ``drops``, with ``seq`` gaps showing exactly where.

Frames are accepted only from the operator client (first to send any
command; the lock releases on disconnect). Malformed or unknown
messages get an inline error reply and the connection stays open.

HTTP side: ``/about`` (service facts), ``/chain/{side}`` (chain file
text), ``/reference-library`` (library text), ``/fk-fixtures``
(deterministic FK conformance vectors for client-side kinematics), and
optional static hosting of a cockpit build directory at ``/ui``.
"""

from __future__ import annotations

import asyncio
import socket
from contextlib import asynccontextmanager
from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse, PlainTextResponse
from starlette.staticfiles import StaticFiles
from starlette.websockets import WebSocket, WebSocketDisconnect

from . import protocol as proto
from .coordination import library_to_text
from .errors import ParseError, PortInUse, TeleopError
from .kinematics import forward_kinematics
from .geometry import rotation_to_quat
from .session import Session
from .simulator import SIDES
from .traces import record_to_frame

ABOUT_NAME = "bimanual-teleop gateway"


class ClientSlot:
    """One-slot latest-wins outbound queue with a drop counter."""

    def __init__(self):
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=1)
        self.drops = 0
        self.seq = 0

    def offer(self, report) -> None:
        if self.queue.full():
            try:
                self.queue.get_nowait()
                self.drops += 1
            except asyncio.QueueEmpty:
                pass
        self.queue.put_nowait(report)


class Gateway:
    def __init__(self, session: Session, static_dir: Path | None = None):
        self.session = session
        self.decimation = session.config.gateway.decimation
        self.dt = session.config.dt
        self.slots: dict[int, ClientSlot] = {}
        self.next_client_id = 0
        self.operator_id: int | None = None
        self.pending_frames: dict[str, object] = {}
        self.clutched: dict[str, bool] = {s: False for s in SIDES}
        self.static_dir = static_dir
        self._tick_task: asyncio.Task | None = None
        self.encode_faults = 0

    # -- tick loop ------------------------------------------------------

    async def run_ticks(self) -> None:
        loop = asyncio.get_running_loop()
        deadline = loop.time()
        while True:
            frames = self.pending_frames
            self.pending_frames = {}
            report = self.session.run_tick(frames, self.dt)
            if report.tick % self.decimation == 0:
                for slot in self.slots.values():
                    slot.offer(report)
            deadline += self.dt
            delay = deadline - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            else:
                deadline = loop.time()  # fell behind; re-pace instead of bursting

    # -- command handling -------------------------------------------------

    def apply_command(self, client_id: int, msg: dict) -> dict | None:
        """Apply one validated command; returns an optional ack message."""
        kind = msg["kind"]
        seq = int(msg.get("seq", 0))
        if self.operator_id is None:
            self.operator_id = client_id
        if self.operator_id != client_id:
            return proto.error_message(seq, "another client holds the operator lock", kind)

        if kind == "frame":
            try:
                frame = record_to_frame(msg["frame"])
            except TeleopError as exc:
                return proto.error_message(seq, str(exc), kind)
            if self.clutched.get(frame.side, False):
                return None  # clutch suppresses frames silently
            self.pending_frames[frame.side] = frame
            return None
        if kind == "calibrate":
            sides = SIDES if msg["side"] == "both" else (msg["side"],)
            for side in sides:
                self.session.retarget_states[side] = None  # next frame re-anchors
                self.session.filters[side].reset()
            return proto.ack_message(seq, kind)
        if kind == "set_mode":
            self.session.set_frame_mode(msg["frame_mode"])
            return proto.ack_message(seq, kind)
        if kind == "inject_wrench":
            try:
                self.session.inject_wrench(msg["side"], np.asarray(msg["wrench"], dtype=float))
            except TeleopError as exc:
                return proto.error_message(seq, str(exc), kind)
            return proto.ack_message(seq, kind)
        if kind == "record_ref":
            index = self.session.record_reference(msg["label"])
            return proto.ack_message(seq, kind, index=index)
        if kind == "clutch":
            side = msg["side"]
            engaged = bool(msg["engaged"])
            was = self.clutched[side]
            self.clutched[side] = engaged
            if was and not engaged:
                # Release: drop the anchor so the next frame re-anchors at
                # the current commanded pose (no jump).
                self.session.retarget_states[side] = None
                self.session.filters[side].reset()
            return proto.ack_message(seq, kind)
        return proto.error_message(seq, f"unknown command kind {kind!r}", kind)

    def handle_text(self, client_id: int, raw: str | bytes) -> dict | None:
        try:
            msg = proto.decode_line(raw)
        except ParseError as exc:
            return proto.error_message(0, str(exc))
        kind = msg.get("kind", "")
        if kind not in proto.COMMAND_KINDS:
            return proto.error_message(int(msg.get("seq", 0)), f"unknown command kind {kind!r}", kind)
        try:
            proto.validate_command(msg)
        except ParseError as exc:
            return proto.error_message(int(msg.get("seq", 0)), str(exc), kind)
        return self.apply_command(client_id, msg)

    # -- client lifecycle ------------------------------------------------

    def attach(self) -> tuple[int, ClientSlot]:
        client_id = self.next_client_id
        self.next_client_id += 1
        slot = ClientSlot()
        self.slots[client_id] = slot
        return client_id, slot

    def detach(self, client_id: int) -> None:
        self.slots.pop(client_id, None)
        if self.operator_id == client_id:
            self.operator_id = None


def fk_fixtures(chains, count: int = 50, seed: int = 2024) -> dict:
    """Deterministic FK conformance vectors. Clients re-implementing the
    chain math (the cockpit) must reproduce ``ee`` from ``q`` to a
    stated tolerance."""
    rng = np.random.default_rng(seed)
    out = {"seed": seed, "tolerance": 1e-6, "sides": {}}
    for side in SIDES:
        chain = chains[side]
        margin = 0.05
        lo = chain.lower_limits + margin
        hi = chain.upper_limits - margin
        cases = []
        for _ in range(count):
            q = rng.uniform(lo, hi)
            pose = forward_kinematics(chain, q)
            quat = rotation_to_quat(pose.rotation)
            cases.append(
                {
                    "q": [float(v) for v in q],
                    "pos": [float(v) for v in pose.translation],
                    "quat": [float(v) for v in quat],
                }
            )
        out["sides"][side] = cases
    return out


def build_app(session: Session, static_dir: Path | None = None) -> FastAPI:
    gateway = Gateway(session, static_dir)

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        gateway._tick_task = asyncio.create_task(gateway.run_ticks())
        try:
            yield
        finally:
            gateway._tick_task.cancel()

    app = FastAPI(
        title=ABOUT_NAME, docs_url=None, redoc_url=None, openapi_url=None, lifespan=lifespan
    )
    app.state.gateway = gateway

    @app.get("/about")
    def about() -> JSONResponse:
        from . import __version__

        return JSONResponse(
            {
                "name": ABOUT_NAME,
                "version": __version__,
                "protocol": proto.PROTOCOL_VERSION,
                "tick_rate_hz": 1.0 / session.config.dt,
                "decimation": gateway.decimation,
                "mode": session.config.mode,
                "frame_mode": session.frame_mode,
            }
        )

    @app.get("/chain/{side}")
    def chain_file(side: str):
        if side not in SIDES:
            return PlainTextResponse(f"unknown side {side!r}\n", status_code=404)
        path = session.config.left_chain if side == "left" else session.config.right_chain
        return PlainTextResponse(Path(path).read_text())

    @app.get("/reference-library")
    def reference_library():
        return PlainTextResponse(library_to_text(session.library))

    @app.get("/fk-fixtures")
    def fixtures() -> JSONResponse:
        return JSONResponse(fk_fixtures(session.chains))

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        client_id, slot = gateway.attach()

        async def reader() -> None:
            while True:
                raw = await ws.receive_text()
                reply = gateway.handle_text(client_id, raw)
                if reply is not None:
                    await ws.send_bytes(proto.encode_message(reply))

        async def writer() -> None:
            while True:
                report = await slot.queue.get()
                try:
                    msg = proto.state_message(report, slot.seq, slot.drops)
                    data = proto.encode_message(msg)
                except TeleopError:
                    gateway.encode_faults += 1  # logged fault; skip this state
                    continue
                slot.seq += 1
                await ws.send_bytes(data)

        tasks = [asyncio.create_task(reader()), asyncio.create_task(writer())]
        try:
            done, pending = await asyncio.wait(tasks, return_when=asyncio.FIRST_COMPLETED)
            for task in pending:
                task.cancel()
            for task in done:
                exc = task.exception()
                if exc is not None and not isinstance(exc, WebSocketDisconnect):
                    raise exc
        except WebSocketDisconnect:
            pass
        finally:
            for task in tasks:
                task.cancel()
            gateway.detach(client_id)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def serve(session: Session, host: str, port: int, static_dir: Path | None = None) -> None:
    """Run the gateway until interrupted. Pre-binds the socket so an
    occupied port fails fast with PortInUse instead of a uvicorn trace."""
    import uvicorn

    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((host, port))
    except OSError as exc:
        sock.close()
        raise PortInUse(f"cannot bind {host}:{port}: {exc}") from None
    app = build_app(session, static_dir)
    config = uvicorn.Config(app, log_level="warning")
    server = uvicorn.Server(config)
    server.run(sockets=[sock])
