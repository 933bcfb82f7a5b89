"""Extraction orchestration over pluggable taggers.

Supports single-pass extraction (one prompt, one label per utterance) and
two-stage extraction (question labeling first, answer labeling over the
remaining slots), plus a deterministic rule-based tagger for offline runs and
testing. Taggers are anything satisfying the :class:`Tagger` protocol; the
pipeline never retries a tagger — retry policy belongs to the gateway.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Protocol, runtime_checkable

from .codec import (
    PromptFormat,
    SerializedPrompt,
    labels_to_pairs,
    normalize_labels,
    parse_generated_output,
    parse_slot_labels,
    serialize_cls_prompt,
    serialize_mask_prompt,
    serialize_sentinel_prompt,
)
from .core import (
    DEFAULT_ROLES,
    ExtractionResult,
    LabelSequence,
    QaeError,
    QALabel,
    RoleStrings,
    Session,
    Warning,
)

QUESTION_LABEL_SPACE = ("O", "Q")
#: Label surfaces a sequence tagger may emit; open-ended ids are implied.
SEQUENCE_LABEL_SPACE = ("O", "Q1", "A1", "Q2", "A2", "...")


class TaggerFailure(QaeError):
    """A tagger could not produce output for a session; wraps the cause."""

    def __init__(self, session_id: str, cause: Exception | str):
        self.session_id = session_id
        self.cause = cause
        super().__init__(f"tagger failed on session {session_id!r}: {cause}")


class ModeUnsupportedError(QaeError):
    """The requested extraction mode cannot handle what stage 1 produced."""


@dataclass(frozen=True)
class TaggerOutput:
    """Raw tagger output: exactly one of per-slot surfaces or generated text."""

    slot_labels: tuple[str, ...] | None = None
    generated_text: str | None = None

    def __post_init__(self) -> None:
        if (self.slot_labels is None) == (self.generated_text is None):
            raise ValueError("exactly one of slot_labels / generated_text must be set")


@runtime_checkable
class Tagger(Protocol):
    """Anything that can label a serialized prompt.

    ``formats`` declares which prompt formats it accepts, ``output_style``
    is "slot_labels" or "generated_text", and ``reentrant`` tells the batch
    layer whether concurrent invocation is safe.
    """

    formats: frozenset[PromptFormat]
    output_style: str
    reentrant: bool

    def tag(self, prompt: SerializedPrompt, session_id: str) -> TaggerOutput: ...


class ExtractionMode(Enum):
    END_TO_END = "end_to_end"
    TWO_STAGE_GG = "two_stage_gg"
    TWO_STAGE_BG = "two_stage_bg"


def _serialize(
    session: Session, fmt: PromptFormat, partial: LabelSequence | None, roles: RoleStrings
) -> SerializedPrompt:
    if fmt is PromptFormat.MASK_SEP:
        return serialize_mask_prompt(session, partial, roles)
    if fmt is PromptFormat.SENTINEL_SEMICOLON:
        return serialize_sentinel_prompt(session, partial, roles)
    raise ValueError(f"{fmt} is not a sequence prompt format")


def _invoke(tagger: Tagger, prompt: SerializedPrompt, session_id: str) -> TaggerOutput:
    try:
        return tagger.tag(prompt, session_id)
    except QaeError as exc:
        raise TaggerFailure(session_id, exc) from exc
    except Exception as exc:  # a tagger bug must not take the batch down
        raise TaggerFailure(session_id, exc) from exc


def _parse_output(
    output: TaggerOutput, prompt: SerializedPrompt
) -> tuple[LabelSequence, list[Warning]]:
    if output.slot_labels is not None:
        return parse_slot_labels(output.slot_labels, prompt.n_slots)
    assert output.generated_text is not None
    return parse_generated_output(output.generated_text, prompt.n_slots, prompt.open_slots)


def extract_end_to_end(
    session: Session,
    tagger: Tagger,
    format: PromptFormat,
    roles: RoleStrings = DEFAULT_ROLES,
) -> ExtractionResult:
    """Serialize, tag, parse and collect pairs in one pass."""
    if format not in tagger.formats:
        raise ValueError(f"tagger does not accept prompt format {format.value}")
    prompt = _serialize(session, format, None, roles)
    output = _invoke(tagger, prompt, session.session_id)
    labels, parse_warnings = _parse_output(output, prompt)
    result = labels_to_pairs(labels, session)
    return ExtractionResult(
        result.session_id,
        result.pairs,
        result.label_sequence,
        tuple(parse_warnings) + result.warnings,
    )


def _coerce_stage_labels(
    labels: LabelSequence, keep: str, stage: str
) -> tuple[LabelSequence, list[Warning]]:
    """Restrict a stage's output to its label space; violations become O."""
    out: list[QALabel] = []
    warnings: list[Warning] = []
    for position, label in enumerate(labels, start=1):
        wrong = (keep == "question" and label.is_answer) or (keep == "answer" and label.is_question)
        if wrong:
            warnings.append(
                Warning.malformed_model_output(
                    f"{stage} emitted {label.surface} at utterance {position}; coerced to O"
                )
            )
            out.append(QALabel.outside())
        else:
            out.append(label)
    return LabelSequence.of(out), warnings


def _merge_stages(stage1: LabelSequence, stage2: LabelSequence) -> LabelSequence:
    merged = [
        q_label if q_label.is_question else a_label for q_label, a_label in zip(stage1, stage2)
    ]
    return LabelSequence.of(merged)


def _default_two_stage_format(stage2: Tagger) -> PromptFormat:
    sequence_formats = stage2.formats & {PromptFormat.MASK_SEP, PromptFormat.SENTINEL_SEMICOLON}
    if not sequence_formats:
        raise ValueError("stage-2 tagger accepts no sequence prompt format")
    if len(sequence_formats) == 1:
        return next(iter(sequence_formats))
    return (
        PromptFormat.SENTINEL_SEMICOLON
        if stage2.output_style == "generated_text"
        else PromptFormat.MASK_SEP
    )


def extract_two_stage(
    session: Session,
    stage1: Tagger,
    stage2: Tagger,
    mode: ExtractionMode,
    format: PromptFormat | None = None,
    roles: RoleStrings = DEFAULT_ROLES,
) -> ExtractionResult:
    """Label questions first, then answers over the remaining slots.

    TWO_STAGE_GG runs stage 1 as a contextful sequence tagger; TWO_STAGE_BG
    runs it as a per-utterance binary question classifier (valid only for
    corpora where each question is a single utterance). Stage-2 output is
    restricted to {O, A_k}: stray question labels are coerced to O with a
    warning. When ``format`` is omitted it is inferred from the stage-2
    tagger's capabilities.
    """
    if mode is ExtractionMode.END_TO_END:
        raise ValueError("extract_two_stage requires a two-stage mode")
    if format is None:
        format = _default_two_stage_format(stage2)
    warnings: list[Warning] = []

    if mode is ExtractionMode.TWO_STAGE_BG and PromptFormat.CLS_SINGLE in stage1.formats:
        question_labels, stage1_warnings = binary_stage1(session, stage1)
        warnings.extend(stage1_warnings)
    else:
        if format not in stage1.formats:
            raise ValueError(f"stage-1 tagger does not accept prompt format {format.value}")
        prompt1 = _serialize(session, format, None, roles)
        output1 = _invoke(stage1, prompt1, session.session_id)
        raw1, parse1_warnings = _parse_output(output1, prompt1)
        warnings.extend(parse1_warnings)
        question_labels, coerce1_warnings = _coerce_stage_labels(raw1, "question", "stage 1")
        warnings.extend(coerce1_warnings)
        question_labels = normalize_labels(question_labels)
        if mode is ExtractionMode.TWO_STAGE_BG:
            counts: dict[int, int] = {}
            for label in question_labels:
                if label.is_question:
                    counts[label.pair_id] = counts.get(label.pair_id, 0) + 1
            multi = sorted(k for k, c in counts.items() if c > 1)
            if multi:
                raise ModeUnsupportedError(
                    f"binary stage-1 mode cannot represent multi-utterance questions "
                    f"(pairs {multi} in session {session.session_id!r})"
                )

    if not any(label.is_question for label in question_labels):
        # nothing to answer; stage 2 is skipped
        result = labels_to_pairs(question_labels, session)
        return ExtractionResult(
            result.session_id, result.pairs, result.label_sequence, tuple(warnings) + result.warnings
        )

    if format not in stage2.formats:
        raise ValueError(f"stage-2 tagger does not accept prompt format {format.value}")
    prompt2 = _serialize(session, format, question_labels, roles)
    output2 = _invoke(stage2, prompt2, session.session_id)
    raw2, parse2_warnings = _parse_output(output2, prompt2)
    warnings.extend(parse2_warnings)
    answer_labels, coerce2_warnings = _coerce_stage_labels(raw2, "answer", "stage 2")
    warnings.extend(coerce2_warnings)

    merged = _merge_stages(question_labels, answer_labels)
    result = labels_to_pairs(merged, session)
    return ExtractionResult(
        result.session_id, result.pairs, result.label_sequence, tuple(warnings) + result.warnings
    )


def binary_stage1(
    session: Session, classifier: Tagger
) -> tuple[LabelSequence, list[Warning]]:
    """Classify each utterance as question/not-question in isolation.

    Each utterance is presented as its own "[CLS] <text>" prompt; utterances
    classified as questions are then numbered Q1, Q2, ... in positional
    order. Unrecognized classifier output degrades to O with a warning.
    """
    if PromptFormat.CLS_SINGLE not in classifier.formats:
        raise ValueError("classifier does not accept the CLS_SINGLE prompt format")
    flags: list[bool] = []
    warnings: list[Warning] = []
    for utt in session:
        prompt = serialize_cls_prompt(utt.text)
        output = _invoke(classifier, prompt, session.session_id)
        if output.slot_labels is not None:
            token = output.slot_labels[0] if output.slot_labels else ""
        else:
            assert output.generated_text is not None
            text = output.generated_text
            # generative classifiers may echo the sentinel convention
            tokens = text.replace("<extra_id_0>", " ").split()
            token = tokens[0] if tokens else ""
        if token == "Q" or (token.startswith("Q") and token[1:].isdigit()):
            flags.append(True)
        elif token == "O":
            flags.append(False)
        else:
            warnings.append(
                Warning.malformed_model_output(
                    f"binary classifier returned {token!r} for utterance {utt.index}; treated as O"
                )
            )
            flags.append(False)
    labels: list[QALabel] = []
    next_id = 1
    for is_question in flags:
        if is_question:
            labels.append(QALabel.question(next_id))
            next_id += 1
        else:
            labels.append(QALabel.outside())
    return LabelSequence.of(labels), warnings


@dataclass(frozen=True)
class HeuristicConfig:
    """Knobs for the rule tagger: answer window size and question lexicon.

    An utterance is treated as a question when it ends with "?" (ASCII or
    full-width) or contains one of the lexicon phrases (case-insensitive).
    """

    window: int = 3
    lexicon: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.window < 0:
            raise ValueError(f"window must be >= 0, got {self.window}")

    @staticmethod
    def from_lexicon_file(path: str | Path, window: int = 3) -> "HeuristicConfig":
        """Load a lexicon file: one phrase per line, UTF-8, blank lines skipped."""
        phrases = {
            line.strip().lower()
            for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line.strip()
        }
        return HeuristicConfig(window=window, lexicon=frozenset(phrases))

    def is_question(self, text: str) -> bool:
        stripped = text.strip()
        if stripped.endswith("?") or stripped.endswith("？"):
            return True
        lowered = stripped.lower()
        return any(phrase in lowered for phrase in self.lexicon)


def heuristic_tag(session: Session, config: HeuristicConfig = HeuristicConfig()) -> LabelSequence:
    """Deterministic rule tagger: question mark / lexicon detection plus a
    short answer window.

    Each detected question opens a pair; the contiguous run of following
    utterances spoken by the opposite role, up to ``window`` utterances and
    stopping at the next question, becomes its answer union. Question unions
    are always singletons, so this is a 1-to-N tagger.
    """
    n = len(session)
    labels: list[QALabel] = [QALabel.outside()] * n
    next_id = 0
    for i, utt in enumerate(session):
        if not config.is_question(utt.text):
            continue
        next_id += 1
        labels[i] = QALabel.question(next_id)
        answerer = utt.role.opposite()
        taken = 0
        for j in range(i + 1, n):
            follower = session.utterances[j]
            if config.is_question(follower.text) or follower.role is not answerer:
                break
            if taken >= config.window:
                break
            labels[j] = QALabel.answer(next_id)
            taken += 1
    return LabelSequence.of(labels)


def extract_with_heuristic(
    session: Session, config: HeuristicConfig = HeuristicConfig()
) -> ExtractionResult:
    """Run the rule tagger and collect pairs; the no-model extraction path."""
    return labels_to_pairs(heuristic_tag(session, config), session)
