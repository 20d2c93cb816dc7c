"""HTTP/JSON API under ``/v1``.

Environment: ``BENCH_DATA_DIR`` (store root), ``BENCH_BIND`` (``host:port``).
"""

from __future__ import annotations

import json
import logging
import os
from contextlib import asynccontextmanager

from fastapi import Body, FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from ..errors import (
    ContestClosed,
    EvaluationFailed,
    FormatError,
    InvalidTransition,
    PayloadTooLarge,
    TaskSetMismatch,
    UnknownContest,
    UnknownSubmission,
)
from .contest import BenchService, Stage

log = logging.getLogger(__name__)

DEFAULT_BIND = "127.0.0.1:8080"

_STATUS = [
    (ContestClosed, 409),
    (UnknownContest, 404),
    (UnknownSubmission, 404),
    (PayloadTooLarge, 413),
    (TaskSetMismatch, 422),
    (InvalidTransition, 409),
    (FormatError, 400),
    (EvaluationFailed, 422),
]


def create_app(service: BenchService, run_workers: bool = True) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app):
        if run_workers:
            service.start_workers()
        try:
            yield
        finally:
            service.close()

    app = FastAPI(title="rearrange-bench", lifespan=lifespan)
    app.state.service = service

    for exc_type, code in _STATUS:

        def handler(request, exc, code=code):
            return JSONResponse(status_code=code, content={"error": type(exc).__name__, "detail": str(exc)})

        app.add_exception_handler(exc_type, handler)

    @app.get("/v1/contests")
    def list_contests():
        return {"contests": [{"contest_id": cid, "stage": service.stage(cid).value} for cid in service.contests]}

    @app.post("/v1/contests/{contest_id}/submissions", status_code=201)
    async def submit(contest_id: str, request: Request):
        cfg = service._contest(contest_id)
        raw = await request.body()
        if len(raw) > cfg.max_payload_bytes + 4096:
            raise PayloadTooLarge(f"request body is {len(raw)} bytes")
        try:
            body = json.loads(raw)
        except ValueError as exc:
            raise FormatError(f"invalid JSON: {exc}") from exc
        if not isinstance(body, dict) or "payload" not in body:
            raise FormatError("body must be {team_id, payload}")
        sid = service.submit(contest_id, body.get("team_id"), body["payload"])
        return {"submission_id": sid, "status": "queued"}

    @app.get("/v1/submissions/{submission_id}")
    def submission(submission_id: str):
        return service.get_submission(submission_id).to_doc(with_payload=False)

    @app.post("/v1/submissions/{submission_id}/evaluate")
    def evaluate(submission_id: str):
        service.evaluate_submission(submission_id)
        return service.get_submission(submission_id).to_doc(with_payload=False)

    @app.get("/v1/contests/{contest_id}/leaderboard")
    def leaderboard(contest_id: str, stage: str = "contest"):
        try:
            st = Stage(stage)
        except ValueError:
            raise HTTPException(400, f"unknown stage {stage!r}") from None
        return service.leaderboard(contest_id, st).to_doc()

    @app.get("/v1/contests/{contest_id}/tasks")
    def tasks(contest_id: str):
        return service.tasks_doc(contest_id)

    @app.post("/v1/contests/{contest_id}/stage")
    def stage(contest_id: str, body: dict = Body(...)):
        try:
            to = Stage(body.get("stage"))
        except ValueError:
            raise HTTPException(400, "stage must be trial, contest or closed") from None
        return {"contest_id": contest_id, "stage": service.transition(contest_id, to).value}

    return app


def parse_bind(bind: str) -> tuple[str, int]:
    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bind address must look like host:port, got {bind!r}")
    return host, int(port)


def serve(data_dir: str | None = None, bind: str | None = None, contests=()) -> None:
    """Run the service until interrupted; shutdown snapshots the store."""
    import uvicorn

    data_dir = data_dir or os.environ.get("BENCH_DATA_DIR", "bench-data")
    host, port = parse_bind(bind or os.environ.get("BENCH_BIND", DEFAULT_BIND))
    service = BenchService(data_dir, contests)
    app = create_app(service)
    uvicorn.run(app, host=host, port=port, log_level="warning")
