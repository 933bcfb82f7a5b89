"""Prompt serialization and label decoding.

Turns a session into the fill-in-the-blank prompt formats consumed by
sequence taggers, parses raw tagger output back into label sequences, and
converts bidirectionally between label sequences and QA-pair sets. Parsing is
total: malformed output degrades to O labels plus warnings so one bad
generation never aborts a batch.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .core import (
    DEFAULT_ROLES,
    ExtractionResult,
    IndexOutOfRangeError,
    LabelSequence,
    QaeError,
    QALabel,
    QAPair,
    RoleStrings,
    Session,
    Warning,
    check_role_consistency,
)


class LengthMismatchError(QaeError):
    """A label sequence does not align with the session it is applied to."""


class OverlappingUnionsError(QaeError):
    """Two pairs claim the same utterance index."""


class PromptFormat(Enum):
    """Serialization grammar for tagger input.

    MASK_SEP: one "[MASK]" slot per utterance, "[SEP]"-separated (for
    models that predict one label per masked position).
    SENTINEL_SEMICOLON: one "<extra_id_i>" sentinel per utterance,
    semicolon-separated (for text-to-text models that generate
    "<extra_id_0> l_1 <extra_id_1> l_2 ...").
    CLS_SINGLE: a single utterance behind a "[CLS]" prefix, for per-utterance
    binary question classification.
    """

    MASK_SEP = "mask_sep"
    SENTINEL_SEMICOLON = "sentinel_semicolon"
    CLS_SINGLE = "cls_single"


@dataclass(frozen=True)
class SerializedPrompt:
    """A rendered prompt plus its slot geometry.

    ``n_slots`` always equals the session length for the sequence formats
    (1 for CLS_SINGLE); ``open_slots`` lists the 0-based positions that were
    rendered as mask/sentinel rather than pre-filled label surfaces.
    """

    format: PromptFormat
    text: str
    n_slots: int
    open_slots: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.n_slots < 1:
            raise ValueError(f"n_slots must be >= 1, got {self.n_slots}")


_SURFACE_RE = re.compile(r"O|Q[1-9][0-9]*|A[1-9][0-9]*")
_SENTINEL_RE = re.compile(r"<extra_id_(\d+)>")


@dataclass(frozen=True)
class LabelToken:
    """A label surface together with its parsed form; parse∘render is identity."""

    surface: str
    parsed: QALabel

    @staticmethod
    def from_surface(surface: str) -> "LabelToken | None":
        """Parse "O" / "Q<k>" / "A<k>"; None when the surface is not in the grammar."""
        if not _SURFACE_RE.fullmatch(surface):
            return None
        if surface == "O":
            return LabelToken(surface, QALabel.outside())
        pair_id = int(surface[1:])
        if surface[0] == "Q":
            return LabelToken(surface, QALabel.question(pair_id))
        return LabelToken(surface, QALabel.answer(pair_id))


def _check_partial(session: Session, partial: LabelSequence | None) -> None:
    if partial is not None and len(partial) != len(session):
        raise LengthMismatchError(
            f"partial labels have length {len(partial)} but session "
            f"{session.session_id!r} has {len(session)} utterances"
        )


def serialize_mask_prompt(
    session: Session,
    partial: LabelSequence | None = None,
    roles: RoleStrings = DEFAULT_ROLES,
) -> SerializedPrompt:
    """Render "<role>: <text> <slot> [SEP] " per utterance.

    A slot is "[MASK]" unless ``partial`` carries a non-O label there, in
    which case the label surface is written instead (stage-2 fill-in).
    """
    _check_partial(session, partial)
    units: list[str] = []
    open_slots: list[int] = []
    for i, utt in enumerate(session):
        if partial is not None and not partial[i].is_outside:
            slot = partial[i].surface
        else:
            slot = "[MASK]"
            open_slots.append(i)
        units.append(f"{roles.render(utt.role)}: {utt.text.strip()} {slot} [SEP] ")
    return SerializedPrompt(PromptFormat.MASK_SEP, "".join(units), len(session), tuple(open_slots))


def serialize_sentinel_prompt(
    session: Session,
    partial: LabelSequence | None = None,
    roles: RoleStrings = DEFAULT_ROLES,
) -> SerializedPrompt:
    """Render "<role>: <text> <slot> ; " per utterance.

    Open slots are "<extra_id_{i-1}>" sentinels numbered by utterance
    position (0-based); pre-filled slots render the label surface and keep
    the remaining sentinel numbers tied to position, so gaps are expected
    in stage-2 prompts.
    """
    _check_partial(session, partial)
    units: list[str] = []
    open_slots: list[int] = []
    for i, utt in enumerate(session):
        if partial is not None and not partial[i].is_outside:
            slot = partial[i].surface
        else:
            slot = f"<extra_id_{i}>"
            open_slots.append(i)
        units.append(f"{roles.render(utt.role)}: {utt.text.strip()} {slot} ; ")
    return SerializedPrompt(
        PromptFormat.SENTINEL_SEMICOLON, "".join(units), len(session), tuple(open_slots)
    )


def serialize_cls_prompt(text: str) -> SerializedPrompt:
    """Render "[CLS] <text>" for context-free binary question classification."""
    return SerializedPrompt(PromptFormat.CLS_SINGLE, f"[CLS] {text.strip()}", 1, (0,))


def parse_generated_output(
    text: str,
    n_slots: int,
    slots: Iterable[int] | None = None,
) -> tuple[LabelSequence, list[Warning]]:
    """Decode generated text of the form "<extra_id_0> l_1 <extra_id_1> l_2 ...".

    For every expected slot (all of 0..n_slots-1 unless ``slots`` narrows it,
    as stage-2 prompts do) the token following its sentinel is parsed as a
    label surface. Missing sentinels and unparseable tokens yield O plus a
    warning; duplicate sentinels keep their first occurrence; anything else
    in the text is ignored. The returned sequence always has n_slots labels.
    """
    if n_slots < 1:
        raise ValueError(f"n_slots must be >= 1, got {n_slots}")
    expected = sorted(set(range(n_slots)) if slots is None else set(slots))
    if expected and (expected[0] < 0 or expected[-1] >= n_slots):
        raise ValueError(f"slots {expected} outside 0..{n_slots - 1}")

    found: dict[int, str | None] = {}
    matches = list(_SENTINEL_RE.finditer(text))
    for m, nxt in zip(matches, matches[1:] + [None]):
        slot_id = int(m.group(1))
        if slot_id in found:
            continue
        segment = text[m.end() : nxt.start() if nxt is not None else len(text)]
        tokens = segment.split()
        found[slot_id] = tokens[0] if tokens else None

    labels = [QALabel.outside()] * n_slots
    warnings: list[Warning] = []
    for i in expected:
        if i not in found:
            warnings.append(
                Warning.malformed_model_output(f"generated output has no <extra_id_{i}> marker")
            )
            continue
        token = found[i]
        parsed = LabelToken.from_surface(token) if token is not None else None
        if parsed is None:
            warnings.append(
                Warning.malformed_model_output(
                    f"token {token!r} after <extra_id_{i}> is not a label surface"
                )
            )
            continue
        labels[i] = parsed.parsed
    return LabelSequence.of(labels), warnings


def parse_slot_labels(
    surfaces: Sequence[str],
    n_slots: int,
) -> tuple[LabelSequence, list[Warning]]:
    """Decode one label surface per slot, positionally.

    Shorter input is padded with O (one warning per missing slot), longer
    input is truncated (one warning), and unparseable surfaces degrade to O
    with a warning. The returned sequence always has n_slots labels.
    """
    if n_slots < 1:
        raise ValueError(f"n_slots must be >= 1, got {n_slots}")
    labels = [QALabel.outside()] * n_slots
    warnings: list[Warning] = []
    for i in range(n_slots):
        if i >= len(surfaces):
            warnings.append(Warning.malformed_model_output(f"no label for slot {i}"))
            continue
        parsed = LabelToken.from_surface(surfaces[i])
        if parsed is None:
            warnings.append(
                Warning.malformed_model_output(
                    f"surface {surfaces[i]!r} at slot {i} is not a label surface"
                )
            )
            continue
        labels[i] = parsed.parsed
    if len(surfaces) > n_slots:
        warnings.append(
            Warning.malformed_model_output(
                f"{len(surfaces) - n_slots} extra labels beyond {n_slots} slots truncated"
            )
        )
    return LabelSequence.of(labels), warnings


def normalize_labels(labels: LabelSequence) -> LabelSequence:
    """Renumber pair ids to 1..m by first occurrence among question labels.

    Answer labels follow their question's new id; answer ids with no
    matching question keep their partition but are moved to fresh ids after
    the questions (they are flagged and dropped downstream). Idempotent.
    """
    question_ids: dict[int, int] = {}
    for label in labels:
        if label.is_question and label.pair_id not in question_ids:
            question_ids[label.pair_id] = len(question_ids) + 1
    orphan_ids: dict[int, int] = {}
    for label in labels:
        if label.is_answer and label.pair_id not in question_ids and label.pair_id not in orphan_ids:
            orphan_ids[label.pair_id] = len(question_ids) + len(orphan_ids) + 1

    out: list[QALabel] = []
    for label in labels:
        if label.is_question:
            out.append(QALabel.question(question_ids[label.pair_id]))
        elif label.is_answer:
            new_id = question_ids.get(label.pair_id)
            if new_id is None:
                new_id = orphan_ids[label.pair_id]
            out.append(QALabel.answer(new_id))
        else:
            out.append(label)
    return LabelSequence.of(out)


def labels_to_pairs(
    labels: LabelSequence,
    session: Session,
) -> ExtractionResult:
    """Collect QA pairs from a label sequence over a session.

    Pair j is the set of indices labeled Q_j and the set labeled A_j, after
    canonical renumbering. Answer-only ids are dropped with a warning,
    unanswered questions are kept with an empty answer union and flagged,
    and role-consistency warnings are attached. Pairs come out ordered by
    smallest question index.
    """
    if len(labels) != len(session):
        raise LengthMismatchError(
            f"{len(labels)} labels for session {session.session_id!r} "
            f"with {len(session)} utterances"
        )
    norm = normalize_labels(labels)
    questions: dict[int, list[int]] = {}
    answers: dict[int, list[int]] = {}
    for position, label in enumerate(norm, start=1):
        if label.is_question:
            questions.setdefault(label.pair_id, []).append(position)
        elif label.is_answer:
            answers.setdefault(label.pair_id, []).append(position)

    warnings: list[Warning] = []
    for pair_id in sorted(set(answers) - set(questions)):
        warnings.append(Warning.answer_without_question(pair_id, answers[pair_id]))

    pairs: list[QAPair] = []
    for pair_id in sorted(questions):
        pair = QAPair(
            pair_id=pair_id,
            question_indices=tuple(questions[pair_id]),
            answer_indices=tuple(answers.get(pair_id, [])),
        )
        if pair.unanswered:
            warnings.append(Warning.unanswered_question(pair_id))
        pairs.append(pair)
    # normalization orders ids by first question occurrence, so sorting by id
    # is sorting by smallest question index
    draft = ExtractionResult(session.session_id, tuple(pairs), norm, ())
    warnings.extend(check_role_consistency(draft, session))
    return ExtractionResult(session.session_id, tuple(pairs), norm, tuple(warnings))


def pairs_to_labels(
    result: ExtractionResult | Sequence[QAPair],
    n: int,
) -> LabelSequence:
    """Inverse of :func:`labels_to_pairs`: write each pair's unions back as labels.

    Raises :class:`OverlappingUnionsError` when two unions claim the same
    index and :class:`IndexOutOfRangeError` for indices outside 1..n.
    """
    pairs = result.pairs if isinstance(result, ExtractionResult) else tuple(result)
    labels: list[QALabel] = [QALabel.outside()] * n
    claimed: dict[int, int] = {}
    for pair in pairs:
        for index, label in [(i, QALabel.question(pair.pair_id)) for i in pair.question_indices] + [
            (i, QALabel.answer(pair.pair_id)) for i in pair.answer_indices
        ]:
            if not 1 <= index <= n:
                raise IndexOutOfRangeError(f"pair {pair.pair_id} references index {index} outside 1..{n}")
            if index in claimed:
                raise OverlappingUnionsError(
                    f"index {index} claimed by both pair {claimed[index]} and pair {pair.pair_id}"
                )
            claimed[index] = pair.pair_id
            labels[index - 1] = label
    return LabelSequence.of(labels)
