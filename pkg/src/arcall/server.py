"""Network front-end for the relay core.

Two listeners share one RelayCore on one asyncio loop, which is what
serializes all state mutations:

* a raw TCP listener for bots and tools: a single JSON auth line
  (``{"user": ..., "role": ..., "token": ...}\\n``), then framed envelopes
  both ways;
* a FastAPI app serving the browser console: ``/ws`` speaks the same
  envelopes as binary WebSocket messages, control requests that have no
  wire variant (session start, preferences, catalog listing) ride JSON text
  messages on the same socket, and the console bundle is served statically.

Auth is a per-user static token checked against ``tokens.json`` in the
store directory; without that file the server is open (dev mode).
"""

from __future__ import annotations

import asyncio
import json
import logging
import time
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from . import protocol
from .catalog import load_catalog
from .errors import ArcallError
from .relay import ROLES, RelayCore
from .store import StoreDir

log = logging.getLogger(__name__)

TICK_PERIOD_S = 0.25


def now_ms() -> int:
    return int(time.time() * 1000)


class AuthFailed(ArcallError):
    code = "auth_failed"


class RelayServer:
    def __init__(
        self,
        store: StoreDir,
        *,
        glasses_fraction: float = 0.4,
        allow_wearer_reposition: bool = False,
        static_dir: Optional[str] = None,
        clock=now_ms,
    ):
        self.store = store
        self.clock = clock
        self.tokens = store.load_tokens()
        if self.tokens is None:
            log.warning("no tokens.json in %s: running with open auth", store.root)
        catalog = None
        catalog_path = store.root / "catalog.json"
        if catalog_path.is_file():
            catalog = {c.id: c for c in load_catalog(catalog_path)}
            log.info("loaded %d catalog items from %s", len(catalog), catalog_path)
        self.core = RelayCore(
            store.load_friendships(),
            store.load_preferences(),
            glasses_fraction=glasses_fraction,
            catalog=catalog,
            allow_wearer_reposition=allow_wearer_reposition,
            echo_frames_to_wearer=True,  # the console's blur preview
        )
        self.static_dir = static_dir
        self.app = self._build_app()

    # --- auth / control -------------------------------------------------

    def _authenticate(self, user: str, role: str, token: str) -> None:
        if not user or role not in ROLES:
            raise AuthFailed("missing user or bad role")
        if self.tokens is not None and self.tokens.get(user) != token:
            raise AuthFailed(f"bad token for {user!r}")

    def _catalog_payload(self) -> list[dict]:
        return [
            {
                "id": c.id,
                "name": c.name,
                "kind": c.kind.value,
                "anchor": list(c.default_anchor),
                "footprint": list(c.footprint),
            }
            for c in self.core.catalog.values()
        ]

    def handle_control(self, user: str, role: str, request: dict) -> dict:
        """JSON control requests from the console (no wire envelope exists
        for these). Returns the JSON reply."""
        op = request.get("op")
        try:
            if op == "start":
                if role != "wearer":
                    raise AuthFailed("only the wearer starts sessions")
                sess = self.core.handle_start(user, request.get("config"), now=self.clock())
                return {"ok": True, "op": op, "session_id": sess.id,
                        "expires_at": sess.expires_at, "config": {
                            "friend": sess.config.friend,
                            "arcall_duration_s": sess.config.arcall_duration_s,
                            "dropin_duration_s": sess.config.dropin_duration_s,
                            "blur_level": sess.config.blur_level,
                            "presence_indicator": sess.config.presence_indicator,
                        }}
            if op == "set_preferences":
                self.core.preferences.set(user, request.get("config"))
                self.store.save_preferences(self.core.preferences)
                return {"ok": True, "op": op}
            if op == "add_friend":
                other = request.get("user", "")
                self.core.friendships.add(user, other)
                self.store.save_friendships(self.core.friendships)
                return {"ok": True, "op": op}
            if op == "get_catalog":
                return {"ok": True, "op": op, "catalog": self._catalog_payload(),
                        "glasses_fraction": self.core.fov.glasses_fraction}
            raise ArcallError(f"unknown control op {op!r}")
        except ArcallError as exc:
            return {"ok": False, "op": op, "code": exc.code, "detail": exc.detail}
        except ValueError as exc:
            return {"ok": False, "op": op, "code": "invalid_request", "detail": str(exc)}

    # --- websocket + static ------------------------------------------------

    def _build_app(self) -> FastAPI:
        app = FastAPI(title="arcall relay")
        server = self

        @app.get("/healthz")
        async def healthz():
            return {"ok": True, "sessions": len(server.core.sessions)}

        @app.get("/api/catalog")
        async def api_catalog():
            return {"catalog": server._catalog_payload(),
                    "glasses_fraction": server.core.fov.glasses_fraction}

        @app.websocket("/ws")
        async def ws_endpoint(ws: WebSocket):
            user = ws.query_params.get("user", "")
            role = ws.query_params.get("role", "")
            token = ws.query_params.get("token", "")
            try:
                server._authenticate(user, role, token)
            except AuthFailed as exc:
                await ws.close(code=4403, reason=str(exc))
                return
            await ws.accept()
            outbox: asyncio.Queue = asyncio.Queue()
            conn = server.core.attach(
                user, role, lambda msg: outbox.put_nowait(protocol.encode(msg)), server.clock()
            )

            async def writer():
                while True:
                    await ws.send_bytes(await outbox.get())

            writer_task = asyncio.create_task(writer())
            decoder = protocol.StreamDecoder()
            try:
                while True:
                    message = await ws.receive()
                    if message.get("type") == "websocket.disconnect":
                        break
                    if message.get("bytes") is not None:
                        try:
                            for msg in decoder.feed(message["bytes"]):
                                server.core.handle_message(conn, msg, server.clock())
                        except protocol.DecodeError as exc:
                            outbox.put_nowait(
                                protocol.encode(protocol.Error(code=exc.code, detail=exc.detail))
                            )
                            break
                    elif message.get("text") is not None:
                        try:
                            request = json.loads(message["text"])
                        except ValueError:
                            await ws.send_text(json.dumps(
                                {"ok": False, "code": "invalid_request", "detail": "bad JSON"}
                            ))
                            continue
                        await ws.send_text(json.dumps(server.handle_control(user, role, request)))
            except WebSocketDisconnect:
                pass
            finally:
                writer_task.cancel()
                server.core.detach(user, role)

        if self.static_dir and Path(self.static_dir).is_dir():
            app.mount("/", StaticFiles(directory=self.static_dir, html=True), name="console")
        return app

    # --- raw TCP ------------------------------------------------------------

    async def handle_tcp(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        peer = writer.get_extra_info("peername")
        conn = None
        try:
            hello_line = await reader.readline()
            try:
                hello = json.loads(hello_line.decode("utf-8"))
                self._authenticate(hello.get("user", ""), hello.get("role", ""), hello.get("token", ""))
            except (ValueError, AuthFailed) as exc:
                writer.write(protocol.encode(protocol.Error(code="auth_failed", detail=str(exc))))
                return
            user, role = hello["user"], hello["role"]
            conn = self.core.attach(user, role, lambda msg: writer.write(protocol.encode(msg)), self.clock())
            decoder = protocol.StreamDecoder()
            while True:
                data = await reader.read(64 * 1024)
                if not data:
                    break
                try:
                    for msg in decoder.feed(data):
                        self.core.handle_message(conn, msg, self.clock())
                except protocol.DecodeError as exc:
                    writer.write(protocol.encode(protocol.Error(code=exc.code, detail=exc.detail)))
                    break
                await writer.drain()
        except (ConnectionError, asyncio.IncompleteReadError):
            log.debug("tcp peer %s dropped", peer)
        finally:
            if conn is not None:
                self.core.detach(conn.user, conn.role)
            writer.close()

    async def _tick_loop(self) -> None:
        while True:
            await asyncio.sleep(TICK_PERIOD_S)
            self.core.tick(self.clock())

    async def serve(self, listen_addr: str, ws_addr: str) -> None:
        import uvicorn

        tcp_host, tcp_port = _split_addr(listen_addr)
        ws_host, ws_port = _split_addr(ws_addr)
        tcp_server = await asyncio.start_server(self.handle_tcp, tcp_host, tcp_port)
        config = uvicorn.Config(self.app, host=ws_host, port=ws_port, log_level="warning")
        http_server = uvicorn.Server(config)
        tick = asyncio.create_task(self._tick_loop())
        log.info("relay up: tcp=%s ws=http://%s:%d/ws store=%s",
                 listen_addr, ws_host, ws_port, self.store.root)
        try:
            async with tcp_server:
                await asyncio.gather(tcp_server.serve_forever(), http_server.serve())
        finally:
            tick.cancel()


def _split_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)
