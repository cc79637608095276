"""HTTP/WebSocket control surface over a running player engine.

Endpoints::

    GET  /state    -> current PlayerState snapshot (JSON)
    GET  /scene    -> full scene JSON of the loaded container
    POST /command  -> apply a ControlCommand; responds with the events it
                      produced plus the resulting snapshot
    WS   /events   -> pushes the current snapshot on connect, then every
                      state-changed / error / eof event as it happens

All messages are UTF-8 JSON. When a built UI bundle directory is supplied
it is served at the site root.
"""

from __future__ import annotations

import asyncio
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .errors import ObaError
from .player import PlayerEngine, command_from_json


def create_app(engine: PlayerEngine, ui_dir: Optional[str | Path] = None) -> FastAPI:
    subscriptions: set[asyncio.Queue] = set()
    loop_holder: dict = {}

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        loop_holder["loop"] = asyncio.get_running_loop()
        yield
        loop_holder.pop("loop", None)

    app = FastAPI(title="obakit player", docs_url=None, redoc_url=None, lifespan=lifespan)

    def fan_out(event_doc: dict):
        loop = loop_holder.get("loop")
        if loop is None:
            return
        for q in list(subscriptions):
            loop.call_soon_threadsafe(q.put_nowait, event_doc)

    engine.subscribe(fan_out)

    @app.get("/state")
    async def get_state():
        return JSONResponse(engine.snapshot())

    @app.get("/scene")
    async def get_scene():
        doc = engine.scene_json_dict()
        if doc is None:
            return JSONResponse(
                {"type": "error", "code": "no-scene", "message": "no scene loaded"},
                status_code=404,
            )
        return JSONResponse(doc)

    @app.post("/command")
    async def post_command(doc: dict):
        try:
            command = command_from_json(doc)
        except ObaError as exc:
            return JSONResponse(
                {"type": "error", "code": exc.code, "message": exc.message},
                status_code=422,
            )
        events = await asyncio.to_thread(engine.submit, command)
        return JSONResponse(
            {
                "events": [e.to_json_dict() for e in events],
                "state": engine.snapshot(),
            }
        )

    @app.websocket("/events")
    async def events(ws: WebSocket):
        await ws.accept()
        q: asyncio.Queue = asyncio.Queue()
        subscriptions.add(q)
        try:
            await ws.send_json({"type": "state-changed", "state": engine.snapshot()})
            while True:
                await ws.send_json(await q.get())
        except WebSocketDisconnect:
            pass
        finally:
            subscriptions.discard(q)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(
    engine: PlayerEngine,
    port: int = 8765,
    host: str = "127.0.0.1",
    ui_dir: Optional[str | Path] = None,
):
    """Run the control service; blocks until interrupted."""
    import uvicorn

    app = create_app(engine, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
