"""HTTP JSON API for the manual-review workflow.

One process serves the flagged-case queue, records keep/relabel
decisions, reports progress, and exports merged final labels. Decisions
are append-only: each one is fsync'd to a JSONL log before the response
goes out and replayed on startup, so a crash after a 200 never loses a
decision. A decided item is immutable — repeat decisions get 409 — and
all writes serialize through one lock, so exactly one of any number of
concurrent attempts wins.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .classifier import read_predictions
from .correction import (
    CorrectionPolicy,
    ReviewItem,
    final_labels_bytes,
    merge_decisions,
    read_review_queue,
)
from .corpus import TaskSpec
from .errors import PendingDecisions


@dataclass
class Decision:
    item_id: str
    action: str  # "keep" | "set_label"
    label: Optional[int]
    reviewer: Optional[str]
    decided_at: str


class ReviewSession:
    """Queue + predictions + an append-only decisions log."""

    def __init__(self, queue_path, predictions_path, task: TaskSpec,
                 decisions_path):
        self.session_id = uuid.uuid4().hex[:12]
        self.task = task
        self.queue_path = str(queue_path)
        self.predictions_path = str(predictions_path)
        self.decisions_path = str(decisions_path)
        self.created_at = datetime.now(timezone.utc).isoformat()
        self.predictions = read_predictions(predictions_path)
        self._items: dict[str, ReviewItem] = {}
        for item in read_review_queue(queue_path):
            self._items[item.example_id] = item
        self._lock = threading.Lock()
        self._replay()

    def _replay(self) -> None:
        if not os.path.exists(self.decisions_path):
            return
        with open(self.decisions_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                item = self._items.get(rec["id"])
                if item is None or item.decision != "pending":
                    continue  # stale or duplicate log line
                self._items[rec["id"]] = item.decided(
                    rec["action"],
                    set_label=rec.get("label"),
                    reviewer=rec.get("reviewer"),
                    decided_at=rec.get("decided_at"),
                )

    def items(self, status: str = "all") -> list[ReviewItem]:
        out = sorted(self._items.values(), key=lambda it: it.example_id)
        if status == "pending":
            return [it for it in out if it.decision == "pending"]
        if status == "decided":
            return [it for it in out if it.decision != "pending"]
        return out

    def progress(self) -> dict:
        total = len(self._items)
        decided = sum(1 for it in self._items.values() if it.decision != "pending")
        return {"total": total, "decided": decided, "pending": total - decided}

    def decide(self, item_id: str, action: str, label: Optional[int],
               reviewer: Optional[str]) -> ReviewItem:
        """Persist one decision durably; raises KeyError / ValueError /
        LookupError for 404 / 409 / 422 respectively."""
        with self._lock:
            item = self._items.get(item_id)
            if item is None:
                raise KeyError(item_id)
            if item.decision != "pending":
                raise ValueError(f"item {item_id} already decided")
            if action not in ("keep", "set_label"):
                raise LookupError(f"unknown action {action!r}")
            if action == "set_label":
                if label is None:
                    raise LookupError("set_label needs a label")
                if label not in self.task.labels:
                    raise LookupError(
                        f"label {label} not in task labels {self.task.labels}")
            decided_at = datetime.now(timezone.utc).isoformat()
            rec = {"id": item_id, "action": action, "label": label,
                   "reviewer": reviewer, "decided_at": decided_at}
            # durability before visibility: fsync the log line, then mutate
            with open(self.decisions_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            updated = item.decided(action, set_label=label, reviewer=reviewer,
                                   decided_at=decided_at)
            self._items[item_id] = updated
            return updated

    def export(self, fallback: str) -> bytes:
        policy = CorrectionPolicy(task=self.task, pending_fallback=fallback)
        labels = merge_decisions(self.predictions, self.items(), policy)
        return final_labels_bytes(labels)


def _item_summary(item: ReviewItem, task: TaskSpec) -> dict:
    rec = item.to_dict()
    rec["predicted_label_name"] = task.label_name(item.predicted_label)
    explanation = item.verdict.explanation
    rec["explanation_snippet"] = (
        explanation if len(explanation) <= 160 else explanation[:157] + "...")
    # the UI builds its relabel controls from these; it never invents labels
    rec["label_options"] = [{"id": lab, "name": task.label_name(lab)}
                            for lab in task.labels]
    return rec


class DecisionBody(BaseModel):
    action: str
    label: Optional[int] = None
    reviewer: Optional[str] = None


def create_app(session: ReviewSession, ui_dir=None) -> FastAPI:
    app = FastAPI(title="balcor review", version="0.1.0")

    @app.get("/api/queue")
    def get_queue(status: str = "all"):
        if status not in ("pending", "decided", "all"):
            return JSONResponse({"error": f"unknown status {status!r}"}, status_code=400)
        return [_item_summary(it, session.task) for it in session.items(status)]

    @app.post("/api/items/{item_id}/decision")
    def post_decision(item_id: str, body: DecisionBody):
        try:
            item = session.decide(item_id, body.action, body.label, body.reviewer)
        except KeyError:
            return JSONResponse({"error": f"unknown item {item_id!r}"}, status_code=404)
        except ValueError as exc:
            return JSONResponse({"error": str(exc)}, status_code=409)
        except LookupError as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        return _item_summary(item, session.task)

    @app.get("/api/progress")
    def get_progress():
        return session.progress()

    @app.get("/api/export")
    def get_export(fallback: str = "auto"):
        if fallback not in ("auto", "strict"):
            return JSONResponse({"error": f"unknown fallback {fallback!r}"}, status_code=400)
        try:
            body = session.export(fallback)
        except PendingDecisions as exc:
            return JSONResponse(
                {"error": str(exc), "pending_ids": exc.pending_ids}, status_code=409)
        return Response(content=body, media_type="application/x-ndjson")

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(session: ReviewSession, host: str = "127.0.0.1", port: int = 8808,
          ui_dir=None) -> None:
    import uvicorn

    uvicorn.run(create_app(session, ui_dir=ui_dir), host=host, port=port,
                log_level="warning")
