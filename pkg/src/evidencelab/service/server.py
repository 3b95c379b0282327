"""HTTP and WebSocket front end for the session engine.

Each session is owned by one hub holding the engine, an asyncio lock that
serializes every mutation, and the label-to-socket routing table. Sockets
are disposable: a participant who reconnects with their token is rebound and
resumed from engine state, so a dropped connection loses nothing.
"""

from __future__ import annotations

import asyncio
import json
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse

from ..simlab import BLOCK_COLUMNS, FORECAST_COLUMNS, block_rows, forecast_rows
from ..tableio import csv_text
from .engine import ServiceError, SessionConfig, SessionEngine


class SessionHub:
    """One live session: engine, its write lock, sockets, and the log file."""

    def __init__(self, engine: SessionEngine, log_path: Path | None):
        self.engine = engine
        self.lock = asyncio.Lock()
        self.connections: dict[str, WebSocket] = {}
        self.log_path = log_path
        self.persisted = 0
        self.persist()

    def persist(self) -> None:
        events = self.engine.events
        if self.log_path is not None and self.persisted < len(events):
            with open(self.log_path, "a") as fh:
                for event in events[self.persisted :]:
                    fh.write(json.dumps(event, separators=(",", ":")) + "\n")
        self.persisted = len(events)

    async def deliver(
        self, origin: WebSocket | None, outbound: list[tuple[str | None, dict]]
    ) -> None:
        for to, message in outbound:
            target = origin if to is None else self.connections.get(to)
            if target is None:
                continue  # offline; they resume from state on reconnect
            await target.send_text(json.dumps(message, separators=(",", ":")))


def create_app(
    log_dir: str | Path | None = None, ui_dir: str | Path | None = None
) -> FastAPI:
    app = FastAPI(title="evidencelab session service")
    hubs: dict[str, SessionHub] = {}
    app.state.hubs = hubs
    log_root = Path(log_dir) if log_dir is not None else None
    if log_root is not None:
        log_root.mkdir(parents=True, exist_ok=True)

    def hub_or_404(session_id: str) -> SessionHub:
        hub = hubs.get(session_id)
        if hub is None:
            raise HTTPException(status_code=404, detail="no such session")
        return hub

    @app.post("/sessions", status_code=201)
    async def create_session(payload: dict) -> dict:
        try:
            config = SessionConfig.from_payload(payload)
        except (KeyError, TypeError, ValueError) as err:
            raise HTTPException(status_code=422, detail=f"bad config: {err}")
        if config.session_id in hubs:
            raise HTTPException(status_code=409, detail="session id already exists")
        engine = SessionEngine(config)
        path = log_root / f"{config.session_id}.jsonl" if log_root else None
        hubs[config.session_id] = SessionHub(engine, path)
        return {
            "session": config.session_id,
            "tokens": list(engine.join_tokens),
            "status": engine.status(),
        }

    @app.get("/sessions")
    async def list_sessions() -> dict:
        return {"sessions": [hub.engine.status() for hub in hubs.values()]}

    @app.get("/sessions/{session_id}")
    async def session_status(session_id: str) -> dict:
        return hub_or_404(session_id).engine.status()

    @app.post("/sessions/{session_id}/resolve")
    async def resolve_session(session_id: str) -> dict:
        hub = hub_or_404(session_id)
        async with hub.lock:
            try:
                outbound = hub.engine.resolve_payment()
            except ServiceError as err:
                raise HTTPException(status_code=409, detail=str(err))
            hub.persist()
            await hub.deliver(None, outbound)
        return hub.engine.status()

    @app.get("/sessions/{session_id}/export/{table}")
    async def export_table(session_id: str, table: str) -> PlainTextResponse:
        hub = hub_or_404(session_id)
        logs = hub.engine.session_logs()
        if table == "forecasts.csv":
            text = csv_text(FORECAST_COLUMNS, forecast_rows(logs))
        elif table == "blocks.csv":
            text = csv_text(BLOCK_COLUMNS, block_rows(logs))
        else:
            raise HTTPException(status_code=404, detail="unknown export table")
        return PlainTextResponse(text, media_type="text/csv")

    @app.get("/sessions/{session_id}/log")
    async def session_log(session_id: str) -> PlainTextResponse:
        hub = hub_or_404(session_id)
        lines = [json.dumps(e, separators=(",", ":")) for e in hub.engine.events]
        return PlainTextResponse("\n".join(lines) + "\n", media_type="application/x-ndjson")

    @app.websocket("/ws/{session_id}")
    async def socket(ws: WebSocket, session_id: str) -> None:
        hub = hubs.get(session_id)
        if hub is None:
            await ws.close(code=1008)
            return
        await ws.accept()
        bound: str | None = None
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    message = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send_text(
                        json.dumps(
                            {"type": "error", "code": "bad_message", "detail": "not JSON"}
                        )
                    )
                    continue
                async with hub.lock:
                    before = len(hub.engine.join_order)
                    outbound = hub.engine.handle(bound, message)
                    hub.persist()
                    if isinstance(message, dict) and message.get("type") == "join":
                        joined = None
                        if len(hub.engine.join_order) > before:
                            joined = hub.engine.join_order[-1]
                        else:
                            joined = hub.engine.label_for(message.get("token"))
                        if joined is not None:
                            bound = joined
                            hub.connections[bound] = ws
                    await hub.deliver(ws, outbound)
        except WebSocketDisconnect:
            pass
        finally:
            if bound is not None and hub.connections.get(bound) is ws:
                del hub.connections[bound]

    if ui_dir is not None:
        # Mounted last so the API and websocket routes keep priority.
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
