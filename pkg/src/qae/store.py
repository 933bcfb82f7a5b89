"""Durable storage for sessions, extraction results and human review
decisions, plus the live adoption-rate view.

Storage is a directory of append-only line-delimited JSON logs
(sessions.log, extractions.log, reviews.log) with an in-memory materialized
index rebuilt by replay on startup. All mutations go through a single
writer lock; every append is flushed and fsynced so a crash loses at most a
torn final line, which replay tolerates.
"""

from __future__ import annotations

import base64
import csv
import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import IO, Iterable

from .core import ExtractionResult, QaeError, QAPair, Session
from .corpus import (
    extraction_from_json,
    extraction_to_json,
    session_from_json,
    session_to_json,
)


class StoreError(QaeError):
    """Base class for review-store failures."""


class UnknownPairError(StoreError):
    """The review references a pair the store has never seen."""


class AlreadyReviewedError(StoreError):
    """The pair already has a non-pending review."""


class InvalidCursorError(StoreError):
    """The pagination cursor is malformed or from a compacted-away state."""


class ReviewStatus(Enum):
    PENDING = "pending"
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    EDITED = "edited"


@dataclass(frozen=True)
class ReviewRecord:
    """One human decision on one extracted pair.

    Edited reviews carry replacement question/answer texts (both non-empty);
    accepted/rejected reviews carry none. The store stamps the timestamp at
    record time when it is left unset.
    """

    session_id: str
    pair_id: int
    status: ReviewStatus
    reviewer: str = ""
    timestamp: datetime | None = None
    question_text: str | None = None
    answer_text: str | None = None

    def __post_init__(self) -> None:
        if self.status is ReviewStatus.EDITED:
            if not (self.question_text or "").strip() or not (self.answer_text or "").strip():
                raise ValueError("edited reviews require non-empty question and answer texts")
        elif self.question_text is not None or self.answer_text is not None:
            raise ValueError(f"{self.status.value} reviews carry no edited texts")

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "pair_id": self.pair_id,
            "status": self.status.value,
            "reviewer": self.reviewer,
            "timestamp": self.timestamp.isoformat() if self.timestamp else None,
            "question_text": self.question_text,
            "answer_text": self.answer_text,
        }

    @staticmethod
    def from_json(record: dict) -> "ReviewRecord":
        timestamp = record.get("timestamp")
        return ReviewRecord(
            session_id=record["session_id"],
            pair_id=record["pair_id"],
            status=ReviewStatus(record["status"]),
            reviewer=record.get("reviewer", ""),
            timestamp=datetime.fromisoformat(timestamp) if timestamp else None,
            question_text=record.get("question_text"),
            answer_text=record.get("answer_text"),
        )


@dataclass(frozen=True)
class FaqEntry:
    """A knowledge-base entry materialized from an accepted or edited pair."""

    question: str
    answer: str
    session_id: str
    pair_id: int
    created: datetime

    def to_json(self) -> dict:
        return {
            "question": self.question,
            "answer": self.answer,
            "session_id": self.session_id,
            "pair_id": self.pair_id,
            "created": self.created.isoformat(),
        }


@dataclass(frozen=True)
class AdoptionReport:
    accepted: int
    rejected: int
    edited: int
    pending: int
    adoption_rate: float


@dataclass(frozen=True)
class PendingItem:
    """One review-queue entry: the pair, its session transcript, the stub
    review record and any warnings attached to the extraction."""

    session: Session
    pair: QAPair
    review: ReviewRecord
    warnings: tuple


@dataclass(frozen=True)
class PendingPage:
    items: list[PendingItem]
    next_cursor: str | None


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class ReviewStore:
    """Materialized view over the three append-only logs.

    Mutations are serialized through one lock (single-writer discipline);
    reads only touch immutable values and may run concurrently.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}
        self._extractions: dict[str, tuple[int, ExtractionResult]] = {}
        self._reviews: dict[tuple[str, int], ReviewRecord] = {}
        self._faq: list[FaqEntry] = []
        self._next_seq = 0
        self.epoch = 0
        self._replay()
        self._files: dict[str, IO[str]] = {
            name: (self.directory / name).open("a", encoding="utf-8")
            for name in ("sessions.log", "extractions.log", "reviews.log")
        }

    # -- replay ------------------------------------------------------------

    def _read_log(self, name: str) -> Iterable[dict]:
        path = self.directory / name
        if not path.exists():
            return
        lines = path.read_text(encoding="utf-8").splitlines()
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                if line_no == len(lines):
                    return  # torn final write from a crash; drop it
                raise StoreError(f"{path}:{line_no}: corrupt log line") from None

    def _replay(self) -> None:
        meta = self.directory / "meta.json"
        if meta.exists():
            self.epoch = json.loads(meta.read_text(encoding="utf-8")).get("epoch", 0)
        for record in self._read_log("sessions.log"):
            session = session_from_json(record)
            self._sessions[session.session_id] = session
        for record in self._read_log("extractions.log"):
            result, _ = extraction_from_json(record)
            seq = record.get("seq", self._next_seq)
            self._extractions[result.session_id] = (seq, result)
            self._next_seq = max(self._next_seq, seq + 1)
        for record in self._read_log("reviews.log"):
            review = ReviewRecord.from_json(record)
            self._apply_review(review)

    # -- append ------------------------------------------------------------

    def _append(self, name: str, records: list[dict]) -> None:
        fp = self._files[name]
        for record in records:
            fp.write(json.dumps(record, ensure_ascii=False) + "\n")
        fp.flush()
        os.fsync(fp.fileno())

    # -- ingest ------------------------------------------------------------

    def ingest(self, session: Session, result: ExtractionResult) -> None:
        """Add a session and its extraction; the pairs join the pending queue.

        Exclusivity is validated here so the review API can never serve an
        overlapping pair. Re-ingesting a session id replaces it (last wins).
        """
        if session.session_id != result.session_id:
            raise StoreError(
                f"session {session.session_id!r} does not match result {result.session_id!r}"
            )
        claimed: set[int] = set()
        for pair in result.pairs:
            for index in pair.question_indices + pair.answer_indices:
                if index in claimed:
                    raise StoreError(
                        f"session {session.session_id!r}: index {index} appears in two unions"
                    )
                if not 1 <= index <= len(session):
                    raise StoreError(
                        f"session {session.session_id!r}: index {index} outside 1..{len(session)}"
                    )
                claimed.add(index)
        with self._lock:
            seq = self._next_seq
            self._next_seq += 1
            self._append("sessions.log", [session_to_json(session)])
            self._append("extractions.log", [{**extraction_to_json(result), "seq": seq}])
            self._sessions[session.session_id] = session
            self._extractions[session.session_id] = (seq, result)

    def session(self, session_id: str) -> Session | None:
        return self._sessions.get(session_id)

    def extraction(self, session_id: str) -> ExtractionResult | None:
        entry = self._extractions.get(session_id)
        return entry[1] if entry else None

    # -- reviews -----------------------------------------------------------

    def _pair_or_none(self, session_id: str, pair_id: int) -> QAPair | None:
        entry = self._extractions.get(session_id)
        if entry is None:
            return None
        return entry[1].find_pair(pair_id)

    def _joined_texts(self, session: Session, pair: QAPair) -> tuple[str, str]:
        question = "\n".join(session.utterance(i).text for i in pair.question_indices)
        answer = "\n".join(session.utterance(i).text for i in pair.answer_indices)
        return question, answer

    def _apply_review(self, review: ReviewRecord) -> None:
        """Update materialized state for one (already validated) review."""
        key = (review.session_id, review.pair_id)
        self._reviews[key] = review
        if review.status in (ReviewStatus.ACCEPTED, ReviewStatus.EDITED):
            pair = self._pair_or_none(*key)
            session = self._sessions.get(review.session_id)
            if pair is None or session is None:
                raise StoreError(f"review log references unknown pair {key}")
            if review.status is ReviewStatus.EDITED:
                question, answer = review.question_text or "", review.answer_text or ""
            else:
                question, answer = self._joined_texts(session, pair)
            self._faq.append(
                FaqEntry(
                    question=question,
                    answer=answer,
                    session_id=review.session_id,
                    pair_id=review.pair_id,
                    created=review.timestamp or _utcnow(),
                )
            )

    def record_review(self, record: ReviewRecord) -> ReviewRecord:
        """Persist one decision; accepted/edited reviews also materialize a
        FAQ entry. Raises UnknownPairError / AlreadyReviewedError."""
        if record.status is ReviewStatus.PENDING:
            raise ValueError("a review decision cannot be 'pending'")
        with self._lock:
            if self._pair_or_none(record.session_id, record.pair_id) is None:
                raise UnknownPairError(
                    f"no pair {record.pair_id} in session {record.session_id!r}"
                )
            key = (record.session_id, record.pair_id)
            if key in self._reviews:
                raise AlreadyReviewedError(
                    f"pair {record.pair_id} in session {record.session_id!r} already reviewed"
                )
            if record.timestamp is None:
                record = ReviewRecord(
                    session_id=record.session_id,
                    pair_id=record.pair_id,
                    status=record.status,
                    reviewer=record.reviewer,
                    timestamp=_utcnow(),
                    question_text=record.question_text,
                    answer_text=record.answer_text,
                )
            self._append("reviews.log", [record.to_json()])
            self._apply_review(record)
            return record

    def adoption_report(
        self,
        start: datetime | None = None,
        end: datetime | None = None,
        reviewer: str | None = None,
    ) -> AdoptionReport:
        """Counts and adoption rate over non-pending reviews, optionally
        restricted to a [start, end) window and/or one reviewer. The pending
        count is the current queue size and ignores the filter."""
        counts = {ReviewStatus.ACCEPTED: 0, ReviewStatus.REJECTED: 0, ReviewStatus.EDITED: 0}
        for review in self._reviews.values():
            if reviewer is not None and review.reviewer != reviewer:
                continue
            if start is not None and (review.timestamp is None or review.timestamp < start):
                continue
            if end is not None and (review.timestamp is None or review.timestamp >= end):
                continue
            counts[review.status] += 1
        adopted = counts[ReviewStatus.ACCEPTED] + counts[ReviewStatus.EDITED]
        decided = adopted + counts[ReviewStatus.REJECTED]
        return AdoptionReport(
            accepted=counts[ReviewStatus.ACCEPTED],
            rejected=counts[ReviewStatus.REJECTED],
            edited=counts[ReviewStatus.EDITED],
            pending=self._pending_count(),
            adoption_rate=adopted / decided if decided else 0.0,
        )

    # -- pending queue -----------------------------------------------------

    def _pending_keys(self) -> list[tuple[int, str, int]]:
        keys = []
        for session_id, (seq, result) in self._extractions.items():
            for pair in result.pairs:
                if (session_id, pair.pair_id) not in self._reviews:
                    keys.append((seq, session_id, pair.pair_id))
        return sorted(keys)

    def _pending_count(self) -> int:
        return len(self._pending_keys())

    def _encode_cursor(self, key: tuple[int, str, int]) -> str:
        payload = json.dumps({"epoch": self.epoch, "key": list(key)})
        return base64.urlsafe_b64encode(payload.encode("utf-8")).decode("ascii")

    def _decode_cursor(self, cursor: str) -> tuple[int, str, int]:
        try:
            payload = json.loads(base64.urlsafe_b64decode(cursor.encode("ascii")))
            epoch = payload["epoch"]
            seq, session_id, pair_id = payload["key"]
        except Exception as exc:
            raise InvalidCursorError(f"malformed cursor {cursor!r}") from exc
        if epoch != self.epoch:
            raise InvalidCursorError("cursor predates a store compaction")
        return (int(seq), str(session_id), int(pair_id))

    def list_pending(self, cursor: str | None = None, size: int = 50) -> PendingPage:
        """A stable page of pairs awaiting review, ordered by (ingest order,
        session id, pair id); the returned cursor resumes after the last item."""
        if size < 1:
            raise ValueError(f"page size must be >= 1, got {size}")
        after = self._decode_cursor(cursor) if cursor is not None else None
        with self._lock:
            keys = self._pending_keys()
            if after is not None:
                keys = [k for k in keys if k > after]
            page_keys = keys[:size]
            items = []
            for seq, session_id, pair_id in page_keys:
                result = self._extractions[session_id][1]
                pair = result.find_pair(pair_id)
                assert pair is not None
                items.append(
                    PendingItem(
                        session=self._sessions[session_id],
                        pair=pair,
                        review=ReviewRecord(session_id, pair_id, ReviewStatus.PENDING),
                        warnings=result.warnings,
                    )
                )
            next_cursor = (
                self._encode_cursor(page_keys[-1]) if len(keys) > len(page_keys) else None
            )
            return PendingPage(items=items, next_cursor=next_cursor)

    # -- FAQ export ----------------------------------------------------------

    def faq_entries(self) -> list[FaqEntry]:
        return list(self._faq)

    def export_faq_jsonl(self, fp: IO[str]) -> int:
        for entry in self._faq:
            fp.write(json.dumps(entry.to_json(), ensure_ascii=False) + "\n")
        return len(self._faq)

    def export_faq_csv(self, fp: IO[str]) -> int:
        writer = csv.writer(fp)
        writer.writerow(["question", "answer", "session_id", "pair_id", "created"])
        for entry in self._faq:
            writer.writerow(
                [entry.question, entry.answer, entry.session_id, entry.pair_id, entry.created.isoformat()]
            )
        return len(self._faq)

    # -- maintenance ---------------------------------------------------------

    def compact(self) -> None:
        """Rewrite the logs from materialized state and invalidate cursors."""
        with self._lock:
            for fp in self._files.values():
                fp.close()
            ordered = sorted(self._extractions.items(), key=lambda item: item[1][0])
            self._write_log(
                "sessions.log",
                [session_to_json(self._sessions[sid]) for sid, _ in ordered],
            )
            self._write_log(
                "extractions.log",
                [{**extraction_to_json(result), "seq": seq} for _, (seq, result) in ordered],
            )
            self._write_log(
                "reviews.log",
                [review.to_json() for review in self._reviews.values()],
            )
            self.epoch += 1
            meta_tmp = self.directory / "meta.json.tmp"
            meta_tmp.write_text(json.dumps({"epoch": self.epoch}), encoding="utf-8")
            meta_tmp.replace(self.directory / "meta.json")
            self._files = {
                name: (self.directory / name).open("a", encoding="utf-8")
                for name in ("sessions.log", "extractions.log", "reviews.log")
            }

    def _write_log(self, name: str, records: list[dict]) -> None:
        tmp = self.directory / (name + ".tmp")
        with tmp.open("w", encoding="utf-8") as fp:
            for record in records:
                fp.write(json.dumps(record, ensure_ascii=False) + "\n")
            fp.flush()
            os.fsync(fp.fileno())
        tmp.replace(self.directory / name)

    def close(self) -> None:
        with self._lock:
            for fp in self._files.values():
                if not fp.closed:
                    fp.flush()
                    os.fsync(fp.fileno())
                    fp.close()
