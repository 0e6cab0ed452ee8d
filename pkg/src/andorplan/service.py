"""Local HTTP service over one live run: snapshots, events, interventions.

Binds localhost by default; one run per service instance. The UI talks only to
these endpoints.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .engine import InterventionDirective
from .session import RunSession


class RunStatus(BaseModel):
    state: str
    outcome: Optional[str] = None
    iterations: int
    steps: int
    seq: int


class SnapshotResponse(BaseModel):
    format: str
    root_id: str
    nodes: list[dict]
    stack: list[dict]
    memory: dict
    state: str
    outcome: Optional[str] = None
    iterations: int
    steps: int
    seq: int


class EventsResponse(BaseModel):
    events: list[dict]
    last_seq: int


class InterventionRequest(BaseModel):
    kind: str = Field(description="inject_children | prune | pause | resume")
    node_id: str = ""
    descriptions: list[str] = Field(default_factory=list)
    after_iteration: int = 0


class InterventionResponse(BaseModel):
    accepted: bool
    reason: str


class ResultResponse(BaseModel):
    outcome: str
    final_response: str
    trajectory: list[dict]
    iterations: int
    steps: int
    notes: list[str]


def create_app(session: RunSession, console_dir: Optional[str] = None) -> FastAPI:
    """Service over one run; optionally also serves the operator console.

    The console may instead be opened from another local origin (a dev
    server), so simple cross-origin reads/posts are allowed: this binds to
    localhost for a single operator, not to a shared network.
    """
    app = FastAPI(title="andorplan run service")
    app.state.session = session
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/run", response_model=RunStatus)
    def run_status() -> RunStatus:
        snap = session.snapshot()
        return RunStatus(
            state=session.state,
            outcome=snap.get("outcome"),
            iterations=snap.get("iterations", 0),
            steps=snap.get("steps", 0),
            seq=snap.get("seq", 0),
        )

    @app.get("/run/snapshot", response_model=SnapshotResponse)
    def run_snapshot() -> SnapshotResponse:
        snap = dict(session.snapshot())
        snap["state"] = session.state
        return SnapshotResponse(**snap)

    @app.get("/run/events", response_model=EventsResponse)
    def run_events(after: int = 0) -> EventsResponse:
        events = session.events_after(after)
        last_seq = events[-1]["seq"] if events else after
        return EventsResponse(events=events, last_seq=last_seq)

    @app.get("/run/events.ndjson", response_class=PlainTextResponse)
    def run_events_ndjson(after: int = 0) -> str:
        """Records in the exact line-delimited form of the trajectory log."""
        lines = [
            json.dumps(record, separators=(",", ":"))
            for record in session.events_after(after)
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    @app.post("/run/interventions", response_model=InterventionResponse)
    def run_intervention(request: InterventionRequest) -> InterventionResponse:
        if request.kind not in ("inject_children", "prune", "pause", "resume"):
            raise HTTPException(status_code=422, detail=f"unknown kind {request.kind!r}")
        result = session.submit(
            InterventionDirective(
                kind=request.kind,
                node_id=request.node_id,
                descriptions=list(request.descriptions),
                after_iteration=request.after_iteration,
            )
        )
        return InterventionResponse(accepted=result.accepted, reason=result.reason)

    @app.get("/run/result", response_model=ResultResponse)
    def run_result() -> ResultResponse:
        if not session.finished or session.result is None:
            raise HTTPException(status_code=409, detail="run still in progress")
        return ResultResponse(**session.result.as_dict())

    if console_dir is not None:
        root = Path(console_dir)
        if not (root / "index.html").is_file():
            raise ValueError(f"console dir {console_dir!r} has no index.html")
        app.mount("/console", StaticFiles(directory=root, html=True), name="console")

    return app
