"""HTTP service exposing live sessions for observation and HITL control.

Endpoints:
    GET  /sessions                      session views
    GET  /sessions/{id}                 one view
    GET  /sessions/{id}/events?from=N   JSON-lines event stream, live tail
    POST /sessions/{id}/control         {kind, payload} -> acknowledgement

Binds to loopback by default; a bearer token is required for any other bind
address. Event lines match the trace file schema bit for bit.
"""

from __future__ import annotations

import json
import threading
from typing import Iterator

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from .engine import ControlSignal, Engine, SessionView
from .errors import InvalidSignal, SessionFinished, UnknownSession
from .trace import MemorySink

STREAM_POLL_S = 0.2
CONTROL_ACK_TIMEOUT_S = 10.0


def view_to_dict(view: SessionView) -> dict:
    return {
        "session_id": view.session_id,
        "pattern": view.pattern,
        "active_agent": view.active_agent,
        "state": view.state,
        "interactions_used": view.interactions_used,
        "budget": {"max_interactions": view.max_interactions},
        "total_cost": view.total_cost,
        "started_at": view.started_at_ns,
    }


def create_app(engine: Engine, memory_sink: MemorySink, token: str | None = None) -> FastAPI:
    """App over one engine; `memory_sink` must receive the engine's events."""
    app = FastAPI(title="agentrange control api")
    # the console is a static page served from another origin (or file://)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.middleware("http")
    async def check_token(request: Request, call_next):
        if token:
            supplied = request.headers.get("authorization", "")
            if supplied != f"Bearer {token}":
                return JSONResponse({"error": "unauthorized"}, status_code=401)
        return await call_next(request)

    @app.get("/sessions")
    def list_sessions() -> list[dict]:
        return [view_to_dict(v) for v in engine.views()]

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        try:
            return view_to_dict(engine.view(session_id))
        except UnknownSession:
            raise HTTPException(status_code=404, detail=f"unknown session: {session_id}")

    @app.get("/sessions/{session_id}/events")
    def get_events(session_id: str, request: Request) -> StreamingResponse:
        try:
            engine.get_session(session_id)
        except UnknownSession:
            raise HTTPException(status_code=404, detail=f"unknown session: {session_id}")
        from_seq = int(request.query_params.get("from", 0))
        follow = request.query_params.get("follow", "1") not in ("0", "false")

        def stream() -> Iterator[bytes]:
            last = from_seq
            while True:
                events = memory_sink.events(session_id, last)
                for event in events:
                    last = event.seq
                    yield (event.to_json() + "\n").encode("utf-8")
                if not follow:
                    return
                session = engine.get_session(session_id)
                if session.state == "finished" and not memory_sink.events(session_id, last):
                    return
                with memory_sink.changed:
                    memory_sink.changed.wait(timeout=STREAM_POLL_S)

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    @app.post("/sessions/{session_id}/control")
    async def control(session_id: str, request: Request) -> dict:
        body = await request.json()
        try:
            signal = ControlSignal(kind=body.get("kind", ""), payload=body.get("payload"))
        except InvalidSignal as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        try:
            session = engine.get_session(session_id)
            ack = engine.submit_signal(session, signal)
        except UnknownSession:
            raise HTTPException(status_code=404, detail=f"unknown session: {session_id}")
        except SessionFinished:
            raise HTTPException(status_code=409, detail="session already finished")
        outcome = ack.wait(timeout=CONTROL_ACK_TIMEOUT_S)
        if outcome is None:
            return {"applied": False, "queued": True, "seq": None, "noop": False}
        return {"queued": False, **outcome}

    return app


def serve_scripted_session(
    *,
    script_path: str,
    pattern_name: str = "one_tool_agent",
    task: str = "demo task",
    budget: int = 100,
    interaction_delay: float = 0.0,
    trace_dir: str | None = None,
    host: str = "127.0.0.1",
    port: int = 8470,
    token: str | None = None,
    prices=None,
) -> None:
    """Run one scripted session in a background thread and serve the API.

    Intended for demos and the console end-to-end tests. `interaction_delay`
    slows the session down so a human (or test) can steer it.
    """
    import uvicorn

    from .engine import Budget
    from .gateway import ScriptedBackend
    from .patterns import builtin_pattern
    from .trace import JsonlSink, TeeSink

    if host not in ("127.0.0.1", "localhost", "::1") and not token:
        raise SystemExit("refusing to bind beyond loopback without --token")

    memory = MemorySink()
    sink = TeeSink(memory, JsonlSink(trace_dir)) if trace_dir else memory

    class PacedBackend:
        def __init__(self, inner):
            self.inner = inner

        def complete(self, request):
            if interaction_delay:
                import time

                time.sleep(interaction_delay)
            return self.inner.complete(request)

    engine = Engine(
        backend=PacedBackend(ScriptedBackend.from_source(script_path)),
        sink=sink,
        prices=prices,
    )
    session = engine.create_session(builtin_pattern(pattern_name), task, Budget(budget))
    worker = threading.Thread(target=engine.run, args=(session,), daemon=True)
    worker.start()
    app = create_app(engine, memory, token=token)
    print(json.dumps({"session_id": session.id, "port": port}), flush=True)
    uvicorn.run(app, host=host, port=port, log_level="warning")
