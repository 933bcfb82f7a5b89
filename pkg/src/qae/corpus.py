"""Corpus and extraction-result file formats.

Everything on disk is UTF-8 line-delimited JSON. A corpus line carries a
session (and optionally gold labels); an extraction line carries the pairs,
labels, speaker roles and warnings produced for one session. The same
encoders back the review store's logs and the HTTP API's payloads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterator

from .codec import LabelToken, labels_to_pairs
from .core import (
    DEFAULT_ROLES,
    ExtractionResult,
    LabelSequence,
    QaeError,
    QAPair,
    RoleStrings,
    Session,
    SpeakerRole,
    Utterance,
    Warning,
    WarningKind,
    validate_session,
)


class CorpusFormatError(QaeError):
    """A corpus or extraction file line violates its schema."""

    def __init__(self, path: str | Path, line_no: int, detail: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {detail}")


@dataclass(frozen=True)
class CorpusRecord:
    """One corpus line: a session plus its gold labels when annotated."""

    session: Session
    labels: LabelSequence | None


def parse_surfaces(surfaces: list[str]) -> LabelSequence:
    """Parse label surfaces strictly; unknown surfaces are an error here
    (lenient parsing belongs to model-output decoding, not gold data)."""
    labels = []
    for surface in surfaces:
        token = LabelToken.from_surface(surface)
        if token is None:
            raise ValueError(f"{surface!r} is not a label surface")
        labels.append(token.parsed)
    return LabelSequence.of(labels)


def read_corpus(
    path: str | Path, roles: RoleStrings = DEFAULT_ROLES
) -> Iterator[CorpusRecord]:
    """Iterate corpus records, validating sessions and label alignment."""
    with Path(path).open(encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(path, line_no, f"invalid JSON: {exc}") from exc
            try:
                yield corpus_record_from_json(record, roles)
            except (QaeError, ValueError, KeyError, TypeError) as exc:
                raise CorpusFormatError(path, line_no, str(exc)) from exc


def corpus_record_from_json(record: dict, roles: RoleStrings = DEFAULT_ROLES) -> CorpusRecord:
    session_id = record["session_id"]
    utterances = tuple(
        Utterance(index=i, role=roles.parse(u["role"]), text=u["text"])
        for i, u in enumerate(record["utterances"], start=1)
    )
    session = Session(session_id=session_id, utterances=utterances)
    validate_session(session)
    labels = None
    if record.get("labels") is not None:
        labels = parse_surfaces(record["labels"])
        if len(labels) != len(session):
            raise ValueError(
                f"{len(labels)} labels for {len(session)} utterances in session {session_id!r}"
            )
    return CorpusRecord(session=session, labels=labels)


def corpus_record_to_json(
    session: Session,
    labels: LabelSequence | None = None,
    roles: RoleStrings = DEFAULT_ROLES,
) -> dict:
    record: dict = {
        "session_id": session.session_id,
        "utterances": [{"role": roles.render(u.role), "text": u.text} for u in session],
    }
    if labels is not None:
        record["labels"] = labels.surfaces()
    return record


def session_to_json(session: Session) -> dict:
    """Store/API encoding of a session; roles are canonical "C"/"A"."""
    return {
        "session_id": session.session_id,
        "utterances": [
            {"index": u.index, "role": u.role.value, "text": u.text} for u in session
        ],
    }


def session_from_json(record: dict) -> Session:
    return Session(
        session_id=record["session_id"],
        utterances=tuple(
            Utterance(index=u["index"], role=SpeakerRole(u["role"]), text=u["text"])
            for u in record["utterances"]
        ),
    )


def pair_to_json(pair: QAPair) -> dict:
    return {
        "pair_id": pair.pair_id,
        "question_indices": list(pair.question_indices),
        "answer_indices": list(pair.answer_indices),
        "category": pair.category.value,
        "unanswered": pair.unanswered,
    }


def pair_from_json(record: dict) -> QAPair:
    return QAPair(
        pair_id=record["pair_id"],
        question_indices=tuple(record["question_indices"]),
        answer_indices=tuple(record["answer_indices"]),
    )


def warning_to_json(warning: Warning) -> dict:
    record: dict = {"kind": warning.kind.value, "message": warning.message}
    if warning.index is not None:
        record["index"] = warning.index
    if warning.pair_id is not None:
        record["pair_id"] = warning.pair_id
    return record


def warning_from_json(record: dict) -> Warning:
    return Warning(
        kind=WarningKind(record["kind"]),
        message=record["message"],
        index=record.get("index"),
        pair_id=record.get("pair_id"),
    )


def extraction_to_json(result: ExtractionResult, session: Session | None = None) -> dict:
    """Encode an extraction result; when the session is supplied its speaker
    roles ride along so evaluation can classify relations without the corpus."""
    record: dict = {
        "session_id": result.session_id,
        "pairs": [pair_to_json(p) for p in result.pairs],
        "labels": result.label_sequence.surfaces(),
        "warnings": [warning_to_json(w) for w in result.warnings],
    }
    if session is not None:
        record["roles"] = [u.role.value for u in session]
    return record


def extraction_from_json(record: dict) -> tuple[ExtractionResult, list[SpeakerRole] | None]:
    pairs = tuple(pair_from_json(p) for p in record["pairs"])
    labels = parse_surfaces(record["labels"])
    warnings = tuple(warning_from_json(w) for w in record.get("warnings", []))
    result = ExtractionResult(record["session_id"], pairs, labels, warnings)
    roles = None
    if record.get("roles") is not None:
        roles = [SpeakerRole(r) for r in record["roles"]]
        if len(roles) != len(labels):
            raise ValueError(f"{len(roles)} roles for {len(labels)} labels")
    return result, roles


def write_jsonl(fp: IO[str], records: Iterator[dict] | list[dict]) -> int:
    """Write records as one compact JSON object per line; returns the count."""
    count = 0
    for record in records:
        fp.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n")
        count += 1
    return count


@dataclass(frozen=True)
class EvalRecord:
    """One session's labels, pairs and a (possibly skeleton) session, loaded
    from either an annotated corpus file or an extraction file."""

    session_id: str
    labels: LabelSequence
    result: ExtractionResult
    session: Session
    has_roles: bool


def _skeleton_session(session_id: str, roles: list[SpeakerRole] | None, n: int) -> tuple[Session, bool]:
    """A placeholder session carrying only length and (when known) roles."""
    role_list = roles if roles is not None else [SpeakerRole.CUSTOMER] * n
    utterances = tuple(
        Utterance(index=i, role=role, text="-") for i, role in enumerate(role_list, start=1)
    )
    return Session(session_id=session_id, utterances=utterances), roles is not None


def read_eval_file(path: str | Path, roles: RoleStrings = DEFAULT_ROLES) -> list[EvalRecord]:
    """Load an evaluation side: each line is either an annotated corpus
    record ("utterances" + "labels") or an extraction record ("pairs" +
    "labels"). Unlabeled corpus lines are an error — evaluation needs labels."""
    records: list[EvalRecord] = []
    with Path(path).open(encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(path, line_no, f"invalid JSON: {exc}") from exc
            try:
                if "utterances" in raw:
                    corpus_record = corpus_record_from_json(raw, roles)
                    if corpus_record.labels is None:
                        raise ValueError(
                            f"session {corpus_record.session.session_id!r} has no labels"
                        )
                    result = labels_to_pairs(corpus_record.labels, corpus_record.session)
                    records.append(
                        EvalRecord(
                            session_id=corpus_record.session.session_id,
                            labels=result.label_sequence,
                            result=result,
                            session=corpus_record.session,
                            has_roles=True,
                        )
                    )
                elif "pairs" in raw:
                    result, role_list = extraction_from_json(raw)
                    session, has_roles = _skeleton_session(
                        result.session_id, role_list, len(result.label_sequence)
                    )
                    records.append(
                        EvalRecord(
                            session_id=result.session_id,
                            labels=result.label_sequence,
                            result=result,
                            session=session,
                            has_roles=has_roles,
                        )
                    )
                else:
                    raise ValueError("line is neither a corpus record nor an extraction record")
            except (QaeError, ValueError, KeyError, TypeError) as exc:
                if isinstance(exc, CorpusFormatError):
                    raise
                raise CorpusFormatError(path, line_no, str(exc)) from exc
    return records
