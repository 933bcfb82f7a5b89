"""Domain types for two-party dialogue sessions, per-utterance QA labels,
and extracted question-answer pairs, plus the shared validation and
categorization rules every other module builds on.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence


class QaeError(Exception):
    """Base class for all errors raised by this package."""


class NonContiguousIndicesError(QaeError):
    """Session utterance indices are not exactly 1..n ascending."""


class EmptyUtteranceError(QaeError):
    """An utterance has no text after whitespace trimming."""


class IndexOutOfRangeError(QaeError):
    """A pair references an utterance index outside 1..n."""


class EmptyQuestionUnionError(QaeError):
    """A QA pair has an empty question union."""


class SpeakerRole(Enum):
    """One of the two parties in a customer-service conversation."""

    CUSTOMER = "C"
    AGENT = "A"

    def opposite(self) -> "SpeakerRole":
        return SpeakerRole.AGENT if self is SpeakerRole.CUSTOMER else SpeakerRole.CUSTOMER


@dataclass(frozen=True)
class RoleStrings:
    """Corpus-specific rendering of the two roles (e.g. "Patient"/"Doctor").

    Defaults to the canonical "C"/"A". Strings must be non-empty and distinct.
    """

    customer: str = "C"
    agent: str = "A"

    def __post_init__(self) -> None:
        if not self.customer or not self.agent:
            raise ValueError("role strings must be non-empty")
        if self.customer == self.agent:
            raise ValueError("role strings must be distinct")

    def render(self, role: SpeakerRole) -> str:
        return self.customer if role is SpeakerRole.CUSTOMER else self.agent

    def parse(self, text: str) -> SpeakerRole:
        if text == self.customer:
            return SpeakerRole.CUSTOMER
        if text == self.agent:
            return SpeakerRole.AGENT
        raise ValueError(f"unknown role string {text!r} (expected {self.customer!r} or {self.agent!r})")


DEFAULT_ROLES = RoleStrings()


@dataclass(frozen=True)
class Utterance:
    """A single message in a session, 1-based index, attributed to one role.

    Emptiness of ``text`` is a soft structural property checked by
    :func:`validate_session` so that corpora loaded from disk can be
    validated rather than rejected at construction time.
    """

    index: int
    role: SpeakerRole
    text: str

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"utterance index must be >= 1, got {self.index}")


@dataclass(frozen=True)
class Session:
    """One complete two-party conversation: an ordered list of utterances."""

    session_id: str
    utterances: tuple[Utterance, ...]

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self) -> Iterator[Utterance]:
        return iter(self.utterances)

    def utterance(self, index: int) -> Utterance:
        """Look up an utterance by its 1-based index."""
        if not 1 <= index <= len(self.utterances):
            raise IndexOutOfRangeError(
                f"index {index} outside 1..{len(self.utterances)} in session {self.session_id!r}"
            )
        return self.utterances[index - 1]

    def role_of(self, index: int) -> SpeakerRole:
        return self.utterance(index).role


class LabelKind(Enum):
    OUTSIDE = "O"
    QUESTION = "Q"
    ANSWER = "A"


@dataclass(frozen=True)
class QALabel:
    """Per-utterance tag: outside, or question/answer member of pair ``pair_id``."""

    kind: LabelKind
    pair_id: int | None = None

    def __post_init__(self) -> None:
        if self.kind is LabelKind.OUTSIDE:
            if self.pair_id is not None:
                raise ValueError("outside labels carry no pair id")
        else:
            if self.pair_id is None or self.pair_id < 1:
                raise ValueError(f"pair_id must be >= 1, got {self.pair_id}")

    @staticmethod
    def outside() -> "QALabel":
        return _OUTSIDE

    @staticmethod
    def question(pair_id: int) -> "QALabel":
        return QALabel(LabelKind.QUESTION, pair_id)

    @staticmethod
    def answer(pair_id: int) -> "QALabel":
        return QALabel(LabelKind.ANSWER, pair_id)

    @property
    def is_outside(self) -> bool:
        return self.kind is LabelKind.OUTSIDE

    @property
    def is_question(self) -> bool:
        return self.kind is LabelKind.QUESTION

    @property
    def is_answer(self) -> bool:
        return self.kind is LabelKind.ANSWER

    @property
    def surface(self) -> str:
        """Text form: "O", "Q<k>" or "A<k>"."""
        if self.kind is LabelKind.OUTSIDE:
            return "O"
        return f"{self.kind.value}{self.pair_id}"


_OUTSIDE = QALabel(LabelKind.OUTSIDE)


@dataclass(frozen=True)
class LabelSequence:
    """Labels aligned 1:1 with a session's utterances."""

    labels: tuple[QALabel, ...]

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[QALabel]:
        return iter(self.labels)

    def __getitem__(self, i: int) -> QALabel:
        return self.labels[i]

    def surfaces(self) -> list[str]:
        return [label.surface for label in self.labels]

    @staticmethod
    def of(labels: Sequence[QALabel]) -> "LabelSequence":
        return LabelSequence(tuple(labels))


class PairCategory(Enum):
    """Size class of a pair's unions: question size vs answer size."""

    ONE_ONE = "1-1"
    ONE_N = "1-N"
    N_ONE = "N-1"
    N_N = "N-N"


@dataclass(frozen=True)
class QAPair:
    """A question union and an answer union of utterance indices.

    ``answer_indices`` may be empty (an unanswered question kept for review);
    the question union is never empty. Index sets are stored ascending and
    must be disjoint.
    """

    pair_id: int
    question_indices: tuple[int, ...]
    answer_indices: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.pair_id < 1:
            raise ValueError(f"pair_id must be >= 1, got {self.pair_id}")
        if not self.question_indices:
            raise EmptyQuestionUnionError(f"pair {self.pair_id} has an empty question union")
        for indices, name in ((self.question_indices, "question"), (self.answer_indices, "answer")):
            if any(i < 1 for i in indices):
                raise ValueError(f"{name} indices must be >= 1: {indices}")
            if list(indices) != sorted(set(indices)):
                raise ValueError(f"{name} indices must be strictly ascending: {indices}")
        if set(self.question_indices) & set(self.answer_indices):
            raise ValueError(
                f"pair {self.pair_id}: question and answer unions overlap: "
                f"{self.question_indices} vs {self.answer_indices}"
            )

    @property
    def unanswered(self) -> bool:
        return not self.answer_indices

    @property
    def category(self) -> PairCategory:
        return categorize_pair(self)

    @property
    def span(self) -> tuple[int, int]:
        """(min, max) over the combined question and answer indices."""
        combined = self.question_indices + self.answer_indices
        return (min(combined), max(combined))

    def identity(self) -> tuple[frozenset[int], frozenset[int]]:
        """Pair identity used for exact matching: the two index sets."""
        return (frozenset(self.question_indices), frozenset(self.answer_indices))


class WarningKind(Enum):
    ROLE_INCONSISTENCY = "role_inconsistency"
    ANSWER_WITHOUT_QUESTION = "answer_without_question"
    UNANSWERED_QUESTION = "unanswered_question"
    MALFORMED_MODEL_OUTPUT = "malformed_model_output"
    TAGGER_FAILURE = "tagger_failure"


@dataclass(frozen=True)
class Warning:
    """A soft issue attached to an extraction result; never aborts a batch."""

    kind: WarningKind
    message: str
    index: int | None = None
    pair_id: int | None = None

    @staticmethod
    def role_inconsistency(index: int, expected: SpeakerRole) -> "Warning":
        got = expected.opposite()
        return Warning(
            WarningKind.ROLE_INCONSISTENCY,
            f"utterance {index} spoken by {got.value} inside a union expected from {expected.value}",
            index=index,
        )

    @staticmethod
    def answer_without_question(pair_id: int, indices: Sequence[int]) -> "Warning":
        return Warning(
            WarningKind.ANSWER_WITHOUT_QUESTION,
            f"answer labels {list(indices)} reference pair {pair_id} which has no question; dropped",
            pair_id=pair_id,
        )

    @staticmethod
    def unanswered_question(pair_id: int) -> "Warning":
        return Warning(
            WarningKind.UNANSWERED_QUESTION,
            f"pair {pair_id} has no answer utterances",
            pair_id=pair_id,
        )

    @staticmethod
    def malformed_model_output(detail: str) -> "Warning":
        return Warning(WarningKind.MALFORMED_MODEL_OUTPUT, detail)

    @staticmethod
    def tagger_failure(detail: str) -> "Warning":
        return Warning(WarningKind.TAGGER_FAILURE, detail)


@dataclass(frozen=True)
class ExtractionResult:
    """All QA pairs extracted from one session, with provenance labels and
    any soft issues encountered along the way.

    Pairs are ordered by smallest question index and every utterance index
    appears in at most one union across all pairs (exclusive mapping).
    """

    session_id: str
    pairs: tuple[QAPair, ...]
    label_sequence: LabelSequence
    warnings: tuple[Warning, ...] = ()

    def pair_identities(self) -> set[tuple[frozenset[int], frozenset[int]]]:
        return {pair.identity() for pair in self.pairs}

    def find_pair(self, pair_id: int) -> QAPair | None:
        for pair in self.pairs:
            if pair.pair_id == pair_id:
                return pair
        return None


def validate_session(session: Session) -> list[Warning]:
    """Check structural invariants of a session.

    Raises :class:`NonContiguousIndicesError` when indices are not exactly
    1..n ascending and :class:`EmptyUtteranceError` when any utterance text is
    empty after trimming. Returns a (currently always empty) list of soft
    warnings so callers can treat it uniformly with the other checks.
    """
    indices = [u.index for u in session.utterances]
    if indices != list(range(1, len(indices) + 1)):
        raise NonContiguousIndicesError(
            f"session {session.session_id!r}: utterance indices {indices} are not 1..{len(indices)}"
        )
    if not indices:
        raise NonContiguousIndicesError(f"session {session.session_id!r} has no utterances")
    for u in session.utterances:
        if not u.text.strip():
            raise EmptyUtteranceError(
                f"session {session.session_id!r}: utterance {u.index} is empty"
            )
    return []


def check_role_consistency(result: ExtractionResult, session: Session) -> list[Warning]:
    """Flag question utterances spoken by the agent and answer utterances
    spoken by the customer.

    Violations are expected in real data and are warnings, never errors.
    Raises :class:`IndexOutOfRangeError` if the result references an index
    beyond the session length.
    """
    warnings: list[Warning] = []
    for pair in result.pairs:
        for index in pair.question_indices:
            if session.role_of(index) is not SpeakerRole.CUSTOMER:
                warnings.append(Warning.role_inconsistency(index, SpeakerRole.CUSTOMER))
        for index in pair.answer_indices:
            if session.role_of(index) is not SpeakerRole.AGENT:
                warnings.append(Warning.role_inconsistency(index, SpeakerRole.AGENT))
    return warnings


def categorize_pair(pair: QAPair) -> PairCategory:
    """Classify a pair by union sizes: 1-1, 1-N, N-1 or N-N.

    Unanswered pairs (empty answer union) degrade to 1-N / N-N by question
    size, so the function is total on pairs with a non-empty question union.
    """
    nq = len(pair.question_indices)
    na = len(pair.answer_indices)
    if nq == 0:
        raise EmptyQuestionUnionError(f"pair {pair.pair_id} has an empty question union")
    if nq == 1:
        return PairCategory.ONE_ONE if na == 1 else PairCategory.ONE_N
    return PairCategory.N_ONE if na == 1 else PairCategory.N_N
