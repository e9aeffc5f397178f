"""HTTP API over the service node.

All bodies are JSON; errors come back as {code, message, details}. The
alert stream is server-sent events: one JSON violation record per event,
resumable via ?since= or GET /violations.
"""

from __future__ import annotations

import asyncio
import json
import time
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Header, Request
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from ..errors import (
    FoodwatchError,
    InvalidTarget,
    UnknownBadge,
    UnknownSpace,
    ValidationError,
)
from ..tracing import PositionPing
from .node import ServiceNode


class SystemClock:
    def observe(self, t: float | None) -> None:
        pass

    def now(self) -> float:
        return time.time()


class SimulatedClock:
    """Time advances to the largest timestamp seen in the input stream."""

    def __init__(self, start: float = 0.0):
        self._now = start

    def observe(self, t: float | None) -> None:
        if t is not None and t > self._now:
            self._now = t

    def now(self) -> float:
        return self._now


def _error(status_code: int, code: str, message: str, details: list | None = None) -> JSONResponse:
    return JSONResponse(
        status_code=status_code,
        content={"code": code, "message": message, "details": details or []},
    )


REJECT_STATUS = {
    "auth_failed": 401,
    "rate_limited": 429,
}


def create_app(node: ServiceNode, clock=None, ui_dir: str | Path | None = None) -> FastAPI:
    clock = clock or SystemClock()

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        # under a wall clock, batch ticks must fire even with no traffic
        ticker = None
        if isinstance(clock, SystemClock):
            async def tick_loop():
                while True:
                    node.maybe_tick(clock.now())
                    await asyncio.sleep(1.0)

            ticker = asyncio.create_task(tick_loop())
        try:
            yield
        finally:
            if ticker is not None:
                ticker.cancel()
            if node.journal is not None:
                node.journal.sync()

    app = FastAPI(title="foodwatch", version="0.1.0", lifespan=lifespan)
    app.state.node = node
    app.state.clock = clock

    @app.exception_handler(FoodwatchError)
    async def _domain_error(_request: Request, exc: FoodwatchError):
        if isinstance(exc, (UnknownSpace, UnknownBadge)):
            return _error(404, "not_found", str(exc))
        if isinstance(exc, (InvalidTarget, ValidationError)):
            return _error(422, "invalid", str(exc))
        return _error(500, "internal", str(exc))

    @app.post("/events")
    async def post_event(request: Request, x_api_key: str = Header(default="")):
        raw = await request.body()
        try:
            body = json.loads(raw)
            clock.observe(float(body.get("timestamp")) if isinstance(body, dict) else None)
        except (json.JSONDecodeError, TypeError, ValueError):
            pass
        now = clock.now()
        outcome = node.ingest_event(raw, x_api_key, now)
        node.maybe_tick(now)
        if outcome.accepted:
            return JSONResponse(status_code=200, content=outcome.to_json())
        status_code = REJECT_STATUS.get(outcome.reject_reason, 422)
        return _error(
            status_code,
            outcome.reject_reason,
            f"event rejected: {outcome.reject_reason}",
            [e.to_json() for e in outcome.field_errors],
        )

    @app.post("/pings")
    async def post_pings(request: Request):
        body = await request.json()
        if not isinstance(body, list):
            return _error(422, "invalid", "expected a JSON array of pings")
        try:
            pings = [
                PositionPing(
                    badge_id=str(p["badge_id"]),
                    space_id=str(p["space_id"]),
                    x=float(p["x"]),
                    y=float(p["y"]),
                    timestamp=float(p["timestamp"]),
                )
                for p in body
            ]
        except (KeyError, TypeError, ValueError) as exc:
            return _error(422, "invalid", f"bad ping record: {exc}")
        for ping in pings:
            clock.observe(ping.timestamp)
        now = clock.now()
        detected = node.add_pings(pings, now)
        node.maybe_tick(now)
        return {"accepted": len(pings), "proximity_violations": detected}

    @app.post("/infections")
    async def post_infection(request: Request):
        body = await request.json()
        if not isinstance(body, dict) or "badge_id" not in body:
            return _error(422, "invalid", "expected {badge_id, reported_at?, lookback_seconds?}")
        clock.observe(float(body["reported_at"]) if body.get("reported_at") is not None else None)
        now = clock.now()
        reported_at = float(body.get("reported_at") or now)
        lookback = float(body["lookback_seconds"]) if body.get("lookback_seconds") else None
        result = node.report_infection(str(body["badge_id"]), reported_at, lookback, now)
        node.maybe_tick(now)
        return result.to_json()

    @app.post("/spaces/{space_id}/sanitized")
    async def post_sanitized(space_id: str):
        now = clock.now()
        node.sanitize_space(space_id, now)
        return {"space_id": space_id, "at_risk": False}

    @app.post("/people/{badge_id}/reassign")
    async def post_reassign(badge_id: str, request: Request):
        body = await request.json()
        if not isinstance(body, dict) or "space_id" not in body:
            return _error(422, "invalid", "expected {space_id}")
        node.reassign(badge_id, str(body["space_id"]), clock.now())
        person = node.model.person(badge_id)
        return {"badge_id": badge_id, "home_space": person.home_space}

    @app.get("/snapshot")
    async def get_snapshot(at: float | None = None):
        return node.status.snapshot(at if at is not None else clock.now())

    @app.get("/violations")
    async def get_violations(since: float = 0.0):
        return {"violations": [r.to_json() for r in node.published_since(since)]}

    @app.get("/trace/{report_id}")
    async def get_trace(report_id: str):
        result = node.tracer.result(report_id)
        if result is None:
            return _error(404, "not_found", f"no trace result for {report_id}")
        return result.to_json()

    @app.get("/alerts")
    async def get_alerts(request: Request, since: float = 0.0, limit: int | None = None):
        # one JSON violation record per SSE event; ?limit= bounds the stream
        # (handy for polling clients and tests), otherwise it stays open
        async def stream():
            sent = 0
            sent_ids = set()
            while True:
                fresh = [
                    r for r in node.published_since(since) if r.violation_id not in sent_ids
                ]
                for record in fresh:
                    sent += 1
                    sent_ids.add(record.violation_id)
                    yield _sse(record.to_json(), sent)
                    if limit is not None and sent >= limit:
                        return
                if not fresh:
                    yield ": heartbeat\n\n"
                if await request.is_disconnected():
                    return
                await asyncio.sleep(0.05)

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/healthz")
    async def healthz():
        return {
            "status": "ok",
            "model_id": node.model.model_id,
            "area_count": len(node.model.areas()),
            "space_count": len(node.model.spaces),
            "people_count": len(node.model.people),
            "pending_violations": node.pipeline.pending_count(),
            "config_hashes": getattr(app.state, "config_hashes", {}),
        }

    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def _sse(doc: dict, event_id: int) -> str:
    return f"id: {event_id}\ndata: {json.dumps(doc, sort_keys=True)}\n\n"
