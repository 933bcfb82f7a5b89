"""HTTP API behind the review UI.

Thin JSON layer over :class:`~qae.store.ReviewStore`: a paged pending queue,
review submission with conflict semantics (one decision per pair, losers get
409), the adoption-rate gauge, session transcripts and the built UI as
static assets.
"""

from __future__ import annotations

from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .corpus import pair_to_json, session_to_json, warning_to_json
from .store import (
    AlreadyReviewedError,
    InvalidCursorError,
    PendingItem,
    ReviewRecord,
    ReviewStatus,
    ReviewStore,
    UnknownPairError,
)

_DECISIONS = {
    "accept": ReviewStatus.ACCEPTED,
    "reject": ReviewStatus.REJECTED,
    "edit": ReviewStatus.EDITED,
}


class ReviewSubmission(BaseModel):
    session_id: str
    pair_id: int
    decision: str
    reviewer: str = ""
    question_text: str | None = None
    answer_text: str | None = None


def _pending_item_to_json(item: PendingItem) -> dict:
    question, answer = (
        "\n".join(item.session.utterance(i).text for i in indices)
        for indices in (item.pair.question_indices, item.pair.answer_indices)
    )
    return {
        "session_id": item.session.session_id,
        "pair": pair_to_json(item.pair),
        "question_text": question,
        "answer_text": answer,
        "utterances": session_to_json(item.session)["utterances"],
        "warnings": [
            warning_to_json(w)
            for w in item.warnings
            if w.pair_id in (None, item.pair.pair_id)
        ],
    }


def create_app(store: ReviewStore, ui_dir: str | Path | None = None) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        store.close()  # graceful shutdown flushes the logs

    app = FastAPI(title="qae review api", lifespan=lifespan)

    @app.get("/api/pending")
    def pending(cursor: str | None = None, size: int = Query(default=20, ge=1, le=500)):
        try:
            page = store.list_pending(cursor=cursor, size=size)
        except InvalidCursorError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {
            "items": [_pending_item_to_json(item) for item in page.items],
            "next_cursor": page.next_cursor,
        }

    @app.post("/api/reviews")
    def submit_review(submission: ReviewSubmission):
        status = _DECISIONS.get(submission.decision)
        if status is None:
            raise HTTPException(
                status_code=400,
                detail=f"decision must be one of {sorted(_DECISIONS)}, got {submission.decision!r}",
            )
        try:
            record = ReviewRecord(
                session_id=submission.session_id,
                pair_id=submission.pair_id,
                status=status,
                reviewer=submission.reviewer,
                question_text=submission.question_text,
                answer_text=submission.answer_text,
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        try:
            stored = store.record_review(record)
        except UnknownPairError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except AlreadyReviewedError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"status": "ok", "review": stored.to_json()}

    @app.get("/api/metrics/adoption")
    def adoption():
        report = store.adoption_report()
        return {
            "accepted": report.accepted,
            "rejected": report.rejected,
            "edited": report.edited,
            "pending": report.pending,
            "adoption_rate": report.adoption_rate,
        }

    @app.get("/api/sessions/{session_id}")
    def session(session_id: str):
        found = store.session(session_id)
        if found is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
        payload = session_to_json(found)
        extraction = store.extraction(session_id)
        if extraction is not None:
            payload["pairs"] = [pair_to_json(p) for p in extraction.pairs]
            payload["warnings"] = [warning_to_json(w) for w in extraction.warnings]
        return payload

    @app.exception_handler(Exception)
    def unhandled(request, exc):  # pragma: no cover - safety net
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
