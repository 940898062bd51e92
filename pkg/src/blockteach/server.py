"""Transport shells around the pure protocol handler.

TCP carries one JSON message per line (NDJSON); the optional WebSocket mode
(``pip install blockteach[ws]``) carries the identical JSON messages one per
text frame, for browsers that cannot open raw sockets.  Each connection owns
its sessions; the concept store is the only shared resource.

No ``from __future__ import annotations`` here: the WebSocket endpoint's
annotations must stay live objects for the route to resolve them, since the
framework import is local to keep the dependency optional.
"""

import asyncio
import json
from datetime import datetime, timezone

from .concepts import ConceptStore
from .service import ServiceContext, handle_message


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def make_context(store_dir=None) -> ServiceContext:
    store = ConceptStore(store_dir) if store_dir else None
    return ServiceContext(store=store, clock=_utc_now)


class ConnectionHandler:
    """Session bookkeeping for one client connection, transport-agnostic."""

    def __init__(self, ctx: ServiceContext):
        self.ctx = ctx
        self.sessions: dict[str, object] = {}

    def handle_text(self, text: str) -> tuple[list[dict], int]:
        """Process one incoming message; returns (replies, throttle_ms)."""
        try:
            msg = json.loads(text)
            if not isinstance(msg, dict):
                raise ValueError("message must be a JSON object")
        except (json.JSONDecodeError, ValueError) as exc:
            return [{"proto": 1, "type": "error", "session": None, "seq": 0,
                     "rule": "malformed json", "detail": str(exc)}], 0
        sid = msg.get("session")
        state = self.sessions.get(sid)
        state, replies = handle_message(state, msg, self.ctx)
        if state.session_id:
            self.sessions[state.session_id] = state
        throttle = getattr(state, "throttle_ms", 0)
        return replies, throttle


async def _serve_tcp_connection(reader, writer, ctx: ServiceContext) -> None:
    conn = ConnectionHandler(ctx)
    try:
        while True:
            line = await reader.readline()
            if not line:
                break
            text = line.decode("utf-8").strip()
            if not text:
                continue
            replies, throttle = conn.handle_text(text)
            for reply in replies:
                writer.write((json.dumps(reply) + "\n").encode("utf-8"))
                await writer.drain()
                if throttle and reply.get("type") == "plan_frame":
                    await asyncio.sleep(throttle / 1000.0)
    finally:
        writer.close()


async def serve_tcp(host: str = "127.0.0.1", port: int = 0,
                    store_dir=None) -> None:
    ctx = make_context(store_dir)

    async def on_connect(reader, writer):
        await _serve_tcp_connection(reader, writer, ctx)

    server = await asyncio.start_server(on_connect, host, port)
    actual = server.sockets[0].getsockname()
    print(f"listening on {actual[0]}:{actual[1]}", flush=True)
    async with server:
        await server.serve_forever()


def make_ws_app(store_dir=None):
    """FastAPI app exposing the protocol at ws://.../session."""
    try:
        from fastapi import FastAPI, WebSocket, WebSocketDisconnect
    except ImportError as exc:  # pragma: no cover - optional extra
        raise RuntimeError(
            "WebSocket transport needs the 'ws' extra: pip install blockteach[ws]"
        ) from exc

    ctx = make_context(store_dir)
    app = FastAPI()

    @app.websocket("/session")
    async def session_endpoint(ws: WebSocket):
        await ws.accept()
        conn = ConnectionHandler(ctx)
        try:
            while True:
                text = await ws.receive_text()
                replies, throttle = conn.handle_text(text)
                for reply in replies:
                    await ws.send_text(json.dumps(reply))
                    if throttle and reply.get("type") == "plan_frame":
                        await asyncio.sleep(throttle / 1000.0)
        except WebSocketDisconnect:
            pass

    return app


def serve_ws(host: str = "127.0.0.1", port: int = 8000,
             store_dir=None) -> None:  # pragma: no cover - needs uvicorn
    import uvicorn

    uvicorn.run(make_ws_app(store_dir), host=host, port=port)
