"""HTTP surface of the orchestrator.

Bodies are JSON, timestamps are ISO-8601 UTC, and every mutating endpoint
accepts an optional ``now`` override so scripted runs and tests can drive
logical time. Domain errors map onto conventional status codes:
NotQualified 403, unknown ids 404, WrongState 409, DeadlineExceeded 410.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from cellcrowd.errors import (
    CellCrowdError,
    DeadlineExceeded,
    DomainError,
    EmptyBatch,
    InvalidLabel,
    NotQualified,
    UnknownAssignment,
    UnknownTask,
    UnknownWorker,
    WrongState,
)
from cellcrowd.metrics import build_matrix_stack, full_report, render_report, report_as_dict
from cellcrowd.orchestrator.service import Orchestrator
from cellcrowd.records import from_iso8601, to_iso8601, votes_to_csv

_STATUS = [
    (NotQualified, 403),
    (UnknownWorker, 404),
    (UnknownTask, 404),
    (UnknownAssignment, 404),
    (WrongState, 409),
    (DeadlineExceeded, 410),
    (InvalidLabel, 422),
    (EmptyBatch, 422),
    (DomainError, 422),
]


def _status_for(exc: CellCrowdError) -> int:
    for kind, code in _STATUS:
        if isinstance(exc, kind):
            return code
    return 500


def _parse_now(now: str | None) -> float | None:
    if now is None or now == "":
        return None
    try:
        return float(now)
    except ValueError:
        return from_iso8601(now)


class RegisterWorker(BaseModel):
    worker_id: str
    is_master: bool = False
    approval_rate: float | None = None
    approved_count: int | None = None
    submitted_count: int | None = None
    now: str | None = None


class BatchItem(BaseModel):
    item_id: str
    label: str | None = None
    image: str | None = None


class CreateBatch(BaseModel):
    items: list[BatchItem]
    k: int | None = None
    reward_cents: int | None = None
    pairing: str = "sequential"
    seed: int = 0
    batch_id: str | None = None
    now: str | None = None


class SubmitAnswers(BaseModel):
    answers: dict[str, str] = Field(default_factory=dict)
    now: str | None = None


def create_app(orchestrator: Orchestrator) -> FastAPI:
    app = FastAPI(title="cellcrowd orchestrator", version="0.1.0")
    config = orchestrator.config

    @app.exception_handler(CellCrowdError)
    async def domain_error_handler(_req: Request, exc: CellCrowdError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "tasks": len(orchestrator.state.tasks)}

    @app.post("/workers", status_code=201)
    def register_worker(body: RegisterWorker):
        orchestrator.register_worker(
            body.worker_id,
            is_master=body.is_master,
            approval_rate=body.approval_rate,
            approved_count=body.approved_count,
            submitted_count=body.submitted_count,
            now=_parse_now(body.now),
        )
        return orchestrator.worker_snapshot(body.worker_id)

    @app.get("/workers/{worker_id}")
    def get_worker(worker_id: str):
        return orchestrator.worker_snapshot(worker_id)

    @app.post("/batches", status_code=201)
    def create_batch(body: CreateBatch):
        from cellcrowd.consensus import GroundTruthRecord
        from cellcrowd.labels import parse_label

        items: list = []
        images: dict[str, str] = {}
        for entry in body.items:
            if entry.label:
                items.append(GroundTruthRecord(entry.item_id, parse_label(entry.label)))
            else:
                items.append(entry.item_id)
            if entry.image:
                images[entry.item_id] = entry.image
        return orchestrator.create_batch(
            items,
            k=body.k,
            reward_cents=body.reward_cents,
            pairing=body.pairing,
            seed=body.seed,
            batch_id=body.batch_id,
            images=images,
            now=_parse_now(body.now),
        )

    @app.get("/assignments/next")
    def claim_next(worker_id: str = Query(...), now: str | None = None):
        assignment = orchestrator.claim_next(worker_id, now=_parse_now(now))
        if assignment is None:
            return Response(status_code=204)
        task = orchestrator.state.tasks[assignment.task_id]
        batch = orchestrator.state.batches[task.batch_id]
        return {
            "assignment_id": assignment.assignment_id,
            "task_id": assignment.task_id,
            "items": list(task.items),
            "image_urls": [
                f"/items/{item}/image" if item in batch.images else None
                for item in task.items
            ],
            "claimed_at": to_iso8601(assignment.claimed_at),
            "deadline": to_iso8601(assignment.deadline),
            "reward_cents": task.reward_cents,
        }

    @app.post("/assignments/{assignment_id}/submit")
    def submit(assignment_id: str, body: SubmitAnswers):
        receipt = orchestrator.submit_answers(
            assignment_id, dict(body.answers), now=_parse_now(body.now)
        )
        worker = orchestrator.worker_snapshot(receipt["worker_id"])
        receipt = dict(receipt)
        receipt["submitted_at"] = (
            to_iso8601(receipt["submitted_at"]) if receipt["submitted_at"] else None
        )
        receipt["pending_cents"] = worker["pending_cents"]
        receipt["balance_cents"] = worker["balance_cents"]
        return receipt

    @app.post("/admin/sweep")
    def sweep(now: str | None = None):
        return orchestrator.sweep_timers(now=_parse_now(now))

    @app.post("/admin/assignments/{assignment_id}/approve")
    def approve(assignment_id: str, now: str | None = None):
        orchestrator.approve(assignment_id, now=_parse_now(now))
        return {"assignment_id": assignment_id, "state": "approved"}

    @app.post("/admin/assignments/{assignment_id}/reject")
    def reject(assignment_id: str, now: str | None = None):
        orchestrator.reject(assignment_id, now=_parse_now(now))
        return {"assignment_id": assignment_id, "state": "rejected"}

    @app.get("/tasks/{task_id}")
    def task_status(task_id: str):
        return orchestrator.task_status(task_id)

    @app.get("/batches/{batch_id}")
    def batch_status(batch_id: str):
        return orchestrator.batch_status(batch_id)

    @app.get("/batches/{batch_id}/votes.csv")
    def votes_csv(batch_id: str):
        votes = orchestrator.export_votes(batch_id)
        return PlainTextResponse(votes_to_csv(votes), media_type="text/csv")

    @app.get("/batches/{batch_id}/report")
    def batch_report(batch_id: str, format: str = "json"):
        truth = orchestrator.batch_truth(batch_id)
        if not truth:
            raise WrongState(f"batch {batch_id} has no ground truth to score against")
        votes = orchestrator.export_votes(batch_id)
        k = orchestrator.state.tasks[orchestrator.state.batches[batch_id].task_ids[0]].k
        report = full_report(build_matrix_stack(votes, truth, k=k))
        if format == "text":
            return PlainTextResponse(render_report(report))
        return report_as_dict(report)

    @app.get("/items/{item_id}/image")
    def item_image(item_id: str):
        for batch in orchestrator.state.batches.values():
            path = batch.images.get(item_id)
            if path:
                file = Path(config.crops_dir) / path if config.crops_dir else Path(path)
                if file.exists():
                    return FileResponse(file)
        return JSONResponse(status_code=404, content={"error": "NoImage", "detail": item_id})

    if config.frontend_dir and Path(config.frontend_dir).is_dir():
        app.mount("/app", StaticFiles(directory=config.frontend_dir, html=True), name="app")

    return app
