from __future__ import annotations

import pytest

from qae.codec import PromptFormat
from qae.core import (
    LabelSequence,
    QAPair,
    Session,
    SpeakerRole,
    Utterance,
)
from qae.corpus import parse_surfaces
from qae.pipeline import TaggerOutput


def make_session(session_id: str, turns: list[tuple[str, str]]) -> Session:
    """Build a session from (role letter, text) turns."""
    utterances = tuple(
        Utterance(index=i, role=SpeakerRole(role), text=text)
        for i, (role, text) in enumerate(turns, start=1)
    )
    return Session(session_id=session_id, utterances=utterances)


def labels(surfaces: list[str]) -> LabelSequence:
    return parse_surfaces(surfaces)


@pytest.fixture
def s1() -> Session:
    """The canonical worked fixture used across the suite."""
    return make_session(
        "s1",
        [
            ("C", "Hi, my package hasn't arrived?"),
            ("A", "Let me check."),
            ("A", "It will arrive tomorrow."),
            ("C", "Also how do I get a refund?"),
            ("A", "Go to the orders page."),
            ("C", "Thanks."),
        ],
    )


@pytest.fixture
def s1_labels() -> LabelSequence:
    return labels(["Q1", "O", "A1", "Q2", "A2", "O"])


@pytest.fixture
def s1_pairs() -> tuple[QAPair, QAPair]:
    return (
        QAPair(pair_id=1, question_indices=(1,), answer_indices=(3,)),
        QAPair(pair_id=2, question_indices=(4,), answer_indices=(5,)),
    )


# Four-utterance sessions covering each between-pair relation. The label
# pattern fixes the span geometry; the roles fix who asks each question.
STRUCTURE_FIXTURES: dict[str, tuple[list[str], list[tuple[str, str]]]] = {
    "f_sf": (
        ["Q1", "A1", "Q2", "A2"],
        [
            ("C", "Which department should I book?"),
            ("A", "Orthopedics."),
            ("C", "Could it be lack of sleep?"),
            ("A", "Poor posture is more likely."),
        ],
    ),
    "f_fis": (
        ["Q1", "A1", "Q2", "A2"],
        [
            ("A", "Any other symptoms?"),
            ("C", "I can't sleep well."),
            ("C", "Can I wipe it with alcohol?"),
            ("A", "Use warm water instead."),
        ],
    ),
    "f_cc": (
        ["Q1", "Q2", "A2", "A1"],
        [
            ("C", "What is causing this?"),
            ("A", "Which parts are affected?"),
            ("C", "Hands and neck."),
            ("A", "Apply calamine lotion and observe."),
        ],
    ),
    "f_bi": (
        ["Q1", "Q2", "A2", "A1"],
        [
            ("A", "What medicine have you taken?"),
            ("A", "Are you still taking it?"),
            ("C", "Still taking it."),
            ("C", "Cold tablets."),
        ],
    ),
    "f_ed": (
        ["Q1", "Q2", "A1", "A2"],
        [
            ("A", "How long has it hurt?"),
            ("A", "Constant pain or bouts?"),
            ("C", "Two or three days."),
            ("C", "It comes in waves."),
        ],
    ),
}


def structure_fixture(name: str) -> tuple[Session, LabelSequence]:
    surface_list, turns = STRUCTURE_FIXTURES[name]
    return make_session(name, turns), labels(surface_list)


class SlotTagger:
    """Test tagger returning canned slot labels per session."""

    reentrant = True
    output_style = "slot_labels"
    formats = frozenset(
        {PromptFormat.MASK_SEP, PromptFormat.SENTINEL_SEMICOLON, PromptFormat.CLS_SINGLE}
    )

    def __init__(self, by_session: dict[str, list[str]]):
        self.by_session = by_session
        self.calls: list[str] = []

    def tag(self, prompt, session_id: str) -> TaggerOutput:
        self.calls.append(prompt.text)
        return TaggerOutput(slot_labels=tuple(self.by_session[session_id]))


class GenerativeOracle:
    """Test tagger that answers any prompt from a full reference label
    sequence, emitting sentinel text only for the prompt's open slots.

    Used as both stages of a two-stage run: stage 1 sees every slot open and
    reports questions only; stage 2 reports the reference labels of the
    remaining slots.
    """

    reentrant = True
    output_style = "generated_text"
    formats = frozenset({PromptFormat.MASK_SEP, PromptFormat.SENTINEL_SEMICOLON})

    def __init__(self, references: dict[str, LabelSequence], stage: str = "full"):
        assert stage in ("full", "questions")
        self.references = references
        self.stage = stage

    def tag(self, prompt, session_id: str) -> TaggerOutput:
        reference = self.references[session_id]
        chunks = []
        for slot in prompt.open_slots:
            label = reference[slot]
            surface = label.surface
            if self.stage == "questions" and not label.is_question:
                surface = "O"
            chunks.append(f"<extra_id_{slot}> {surface}")
        return TaggerOutput(generated_text=" ".join(chunks))


def question_only(sequence: LabelSequence) -> LabelSequence:
    from qae.core import QALabel

    return LabelSequence.of(
        [label if label.is_question else QALabel.outside() for label in sequence]
    )


def random_valid_extraction(rng) -> tuple[list[QAPair], int]:
    """A random exclusivity-respecting pair list over a session of length n.

    Pairs have 1-2 question utterances, 0-2 answer utterances (0 models an
    unanswered question), are mutually disjoint and come out ordered by
    smallest question index with ids 1..m.
    """
    n = rng.randint(1, 12)
    indices = list(range(1, n + 1))
    rng.shuffle(indices)
    raw: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
    cursor = 0
    for _ in range(rng.randint(0, 3)):
        q_size = rng.randint(1, 2)
        a_size = rng.randint(0, 2)
        if cursor + q_size + a_size > n:
            break
        questions = tuple(sorted(indices[cursor : cursor + q_size]))
        cursor += q_size
        answers = tuple(sorted(indices[cursor : cursor + a_size]))
        cursor += a_size
        raw.append((questions, answers))
    raw.sort(key=lambda qa: min(qa[0]))
    pairs = [
        QAPair(pair_id=k, question_indices=q, answer_indices=a)
        for k, (q, a) in enumerate(raw, start=1)
    ]
    return pairs, n
