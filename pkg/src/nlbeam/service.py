"""Confirm-before-execute HTTP service.

Workflow: POST /interpret (or /script) creates a pending interpretation;
nothing touches the beamline until POST /confirm. /reject discards.
GET /state, /history and /events expose read-only views; /events is a
long-pollable stream resumable by sequence number.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.exceptions import HTTPException, RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import simulator
from .errors import ScriptError
from .interpreter import (Interpretation, Script, interpret, parse_script,
                          render_script)
from .tagger import TaggerModel

DEFAULT_EXPIRY_SECONDS = 600.0


class TextBody(BaseModel):
    text: str


class IdBody(BaseModel):
    id: str


@dataclass
class PendingInterpretation:
    id: str
    text: str
    script: Script
    rendered: str
    spans: list
    warnings: list[str]
    created_at: float
    status: str = "pending"  # pending|confirmed|rejected|expired


@dataclass
class HistoryEntry:
    id: str
    text: str
    rendered: str
    outcome: str  # executed|rejected|failed
    log_events: int
    measurements: int
    created_at: float
    completed_at: float


@dataclass
class ServiceContext:
    model: TaggerModel | None = None
    expiry_seconds: float = DEFAULT_EXPIRY_SECONDS
    state: simulator.BeamlineState = field(default_factory=simulator.reset)
    pending: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    events: list = field(default_factory=list)  # frames {seq, kind, payload}
    now: object = time.monotonic  # injectable clock for expiry tests
    lock: threading.Lock = field(default_factory=threading.Lock)
    executor_lock: threading.Lock = field(default_factory=threading.Lock)
    events_changed: threading.Condition = None

    def __post_init__(self):
        self.events_changed = threading.Condition(self.lock)

    def publish(self, kind: str, payload: dict) -> None:
        """Append one event frame; callers must hold self.lock."""
        self.events.append(
            {"seq": len(self.events), "kind": kind, "payload": payload})
        self.events_changed.notify_all()


def _error(status: int, code: str, message: str, detail=None):
    raise HTTPException(status_code=status, detail={
        "code": code, "message": message, "detail": detail})


def _span_view(span) -> dict:
    return {"entity": span.entity, "prefix": span.prefix,
            "surface": span.surface, "start": span.start, "end": span.end,
            "value": span.value}


def _pending_view(item: PendingInterpretation) -> dict:
    return {"id": item.id, "text": item.text, "rendered": item.rendered,
            "spans": [_span_view(s) for s in item.spans],
            "warnings": item.warnings, "status": item.status}


def _history_view(entry: HistoryEntry) -> dict:
    return {"id": entry.id, "text": entry.text, "rendered": entry.rendered,
            "outcome": entry.outcome, "log_events": entry.log_events,
            "measurements": entry.measurements,
            "created_at": entry.created_at,
            "completed_at": entry.completed_at}


def create_app(model: TaggerModel | None = None,
               expiry_seconds: float = DEFAULT_EXPIRY_SECONDS) -> FastAPI:
    app = FastAPI(title="nlbeam", version="0.1.0")
    ctx = ServiceContext(model=model, expiry_seconds=expiry_seconds)
    app.state.ctx = ctx
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"])

    @app.exception_handler(HTTPException)
    async def http_error(request: Request, exc: HTTPException):
        detail = exc.detail if isinstance(exc.detail, dict) else {
            "code": "error", "message": str(exc.detail), "detail": None}
        return JSONResponse(status_code=exc.status_code, content=detail)

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request,
                               exc: RequestValidationError):
        return JSONResponse(status_code=400, content={
            "code": "bad-request", "message": "invalid request body",
            "detail": str(exc)})

    def store_pending(text: str, script: Script, rendered: str,
                      spans: list, warnings: list[str]) -> dict:
        item = PendingInterpretation(
            id=uuid.uuid4().hex, text=text, script=script,
            rendered=rendered, spans=spans, warnings=warnings,
            created_at=ctx.now())
        with ctx.lock:
            ctx.pending[item.id] = item
        return _pending_view(item)

    def take_pending(item_id: str, new_status: str
                     ) -> PendingInterpretation:
        """One-shot transition pending -> new_status; raises on conflict."""
        with ctx.lock:
            item = ctx.pending.get(item_id)
            if item is None:
                _error(404, "unknown-id", f"no interpretation {item_id!r}")
            if (item.status == "pending"
                    and ctx.now() - item.created_at > ctx.expiry_seconds):
                item.status = "expired"
            if item.status != "pending":
                _error(409, "not-pending",
                       f"interpretation is {item.status}",
                       {"status": item.status})
            item.status = new_status
            return item

    @app.post("/interpret")
    def post_interpret(body: TextBody):
        if not body.text.strip():
            _error(400, "empty-text", "request text is empty")
        if ctx.model is None:
            _error(503, "no-model", "no tagger model is loaded")
        result: Interpretation = interpret(body.text, ctx.model)
        return store_pending(body.text, result.script, result.rendered,
                             result.spans, result.warnings)

    @app.post("/script")
    def post_script(body: TextBody):
        if not body.text.strip():
            _error(400, "empty-text", "request text is empty")
        try:
            script = parse_script(body.text)
        except ScriptError as exc:
            _error(400, "parse-error", str(exc),
                   {"line": exc.line, "column": exc.column})
        return store_pending(body.text, script, render_script(script),
                             [], [])

    @app.post("/confirm")
    def post_confirm(body: IdBody):
        with ctx.lock:
            item = ctx.pending.get(body.id)
            if (item is not None and item.status == "pending"
                    and not item.script.commands):
                _error(422, "nothing-to-execute",
                       "interpretation produced no executable commands",
                       {"warnings": item.warnings})
        item = take_pending(body.id, "confirmed")
        with ctx.executor_lock:  # serialize executions FIFO
            state, log = simulator.execute(ctx.state, item.script)
            failed = any(e.kind == "fault" for e in log.events)
            with ctx.lock:
                ctx.state = state
                ctx.publish("execution-started", {"id": item.id})
                for ev in log.events:
                    ctx.publish(ev.kind, {"id": item.id, "clock": ev.clock,
                                          **ev.payload})
                ctx.publish("execution-finished", {
                    "id": item.id, "outcome":
                    "failed" if failed else "executed"})
                ctx.history.append(HistoryEntry(
                    id=item.id, text=item.text, rendered=item.rendered,
                    outcome="failed" if failed else "executed",
                    log_events=len(log.events),
                    measurements=len(log.records),
                    created_at=item.created_at, completed_at=ctx.now()))
        return {"id": item.id, "status": item.status,
                "outcome": "failed" if failed else "executed",
                "state": simulator.snapshot(ctx.state),
                "log_events": len(log.events),
                "measurements": len(log.records)}

    @app.post("/reject")
    def post_reject(body: IdBody):
        item = take_pending(body.id, "rejected")
        with ctx.lock:
            ctx.history.append(HistoryEntry(
                id=item.id, text=item.text, rendered=item.rendered,
                outcome="rejected", log_events=0, measurements=0,
                created_at=item.created_at, completed_at=ctx.now()))
        return {"id": item.id, "status": item.status}

    @app.get("/state")
    def get_state():
        with ctx.lock:
            return simulator.snapshot(ctx.state)

    @app.get("/history")
    def get_history(limit: int = 50):
        with ctx.lock:
            entries = ctx.history[-max(0, limit):]
        return {"entries": [_history_view(e) for e in reversed(entries)]}

    @app.get("/events")
    def get_events(since: int = -1, timeout: float = 0.0):
        deadline = time.monotonic() + min(timeout, 30.0)
        with ctx.lock:
            while True:
                fresh = [e for e in ctx.events if e["seq"] > since]
                if fresh or time.monotonic() >= deadline:
                    return {"events": fresh,
                            "last_seq": len(ctx.events) - 1}
                ctx.events_changed.wait(
                    max(0.0, deadline - time.monotonic()))

    return app
