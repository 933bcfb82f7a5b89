"""Evaluation metrics and corpus statistics.

Utterance-level precision/recall/F1 micro-averaged over a corpus (O labels
ignored, correctness is exact label equality including pair id), session-level
adoption rate / hit rate / session F1 over exact pair-set intersections, recall
broken down by dialogue-structure group, and the descriptive statistics used
to characterize a corpus. Every metric with a zero denominator is 0 by
convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .codec import LengthMismatchError, normalize_labels
from .core import ExtractionResult, LabelSequence, PairCategory, QaeError, Session
from .structure import (
    classify_in_pair_shape,
    ordered_pairs,
    relate_adjacent_pairs,
)


class SessionIdMismatchError(QaeError):
    """Predicted and reference collections do not cover the same sessions."""


def _safe_div(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator else 0.0


def _harmonic(a: float, b: float) -> float:
    return 2 * a * b / (a + b) if a + b else 0.0


@dataclass(frozen=True)
class UtteranceScores:
    """Micro-averaged utterance-level scores with their raw counts."""

    precision: float
    recall: float
    f1: float
    predicted_non_o: int
    reference_non_o: int
    correct_non_o: int


@dataclass(frozen=True)
class SessionScores:
    """Pair-level scores: adoption rate, hit rate and their harmonic mean."""

    adoption_rate: float
    hit_rate: float
    session_f1: float
    predicted_pairs: int
    reference_pairs: int
    matched_pairs: int


def utterance_metrics(
    predictions: Sequence[LabelSequence],
    references: Sequence[LabelSequence],
    normalize_ids: bool = True,
) -> UtteranceScores:
    """Micro-averaged P/R/F1 over every utterance position, ignoring O.

    A predicted label counts as correct when it equals the reference label
    exactly, pair id included. Both sides are canonically renumbered first
    (disable with ``normalize_ids=False`` to score raw ids).
    """
    if len(predictions) != len(references):
        raise LengthMismatchError(
            f"{len(predictions)} prediction sequences vs {len(references)} references"
        )
    predicted_non_o = reference_non_o = correct = 0
    for k, (pred, ref) in enumerate(zip(predictions, references)):
        if len(pred) != len(ref):
            raise LengthMismatchError(
                f"instance {k}: prediction has {len(pred)} labels, reference has {len(ref)}"
            )
        if normalize_ids:
            pred = normalize_labels(pred)
            ref = normalize_labels(ref)
        for p, r in zip(pred, ref):
            if not p.is_outside:
                predicted_non_o += 1
            if not r.is_outside:
                reference_non_o += 1
            if not p.is_outside and p == r:
                correct += 1
    precision = _safe_div(correct, predicted_non_o)
    recall = _safe_div(correct, reference_non_o)
    return UtteranceScores(
        precision=precision,
        recall=recall,
        f1=_harmonic(precision, recall),
        predicted_non_o=predicted_non_o,
        reference_non_o=reference_non_o,
        correct_non_o=correct,
    )


def _aligned(
    predicted: Sequence[ExtractionResult],
    reference: Sequence[ExtractionResult],
) -> list[tuple[ExtractionResult, ExtractionResult]]:
    pred_by_id = {r.session_id: r for r in predicted}
    ref_by_id = {r.session_id: r for r in reference}
    if len(pred_by_id) != len(predicted) or len(ref_by_id) != len(reference):
        raise SessionIdMismatchError("duplicate session ids in evaluation input")
    if set(pred_by_id) != set(ref_by_id):
        missing = sorted(set(ref_by_id) ^ set(pred_by_id))
        raise SessionIdMismatchError(f"prediction/reference session ids differ: {missing[:10]}")
    return [(pred_by_id[sid], ref_by_id[sid]) for sid in sorted(pred_by_id)]


def session_metrics(
    predicted: Sequence[ExtractionResult],
    reference: Sequence[ExtractionResult],
) -> SessionScores:
    """Adoption rate, hit rate and session F1 over exact pair matches.

    A predicted pair matches a reference pair only when both index sets are
    equal; matches are counted per session and summed over the corpus.
    """
    n_predicted = n_reference = n_matched = 0
    for pred, ref in _aligned(predicted, reference):
        pred_ids = pred.pair_identities()
        ref_ids = ref.pair_identities()
        n_predicted += len(pred_ids)
        n_reference += len(ref_ids)
        n_matched += len(pred_ids & ref_ids)
    adoption = _safe_div(n_matched, n_predicted)
    hit = _safe_div(n_matched, n_reference)
    return SessionScores(
        adoption_rate=adoption,
        hit_rate=hit,
        session_f1=_harmonic(adoption, hit),
        predicted_pairs=n_predicted,
        reference_pairs=n_reference,
        matched_pairs=n_matched,
    )


class RecallGrouping(Enum):
    CATEGORY = "category"
    IN_PAIR_SHAPE = "in_pair_shape"
    BETWEEN_RELATION = "between_relation"


@dataclass(frozen=True)
class GroupRecall:
    matched: int
    total: int

    @property
    def recall(self) -> float:
        return _safe_div(self.matched, self.total)


def grouped_recall(
    predicted: Sequence[ExtractionResult],
    reference: Sequence[ExtractionResult],
    grouping: RecallGrouping,
    sessions: Mapping[str, Session] | None = None,
) -> dict[object, GroupRecall]:
    """Recall of reference pairs broken down by a structure grouping.

    CATEGORY groups each reference pair by union sizes; IN_PAIR_SHAPE groups
    pairs with both unions non-empty by their interleaving; BETWEEN_RELATION
    assigns both members of every consecutive-pair relation to that
    relation's bucket (so a pair can appear in up to two buckets, and
    single-pair sessions contribute nothing). BETWEEN_RELATION needs the
    sessions for speaker roles.
    """
    if grouping is RecallGrouping.BETWEEN_RELATION and sessions is None:
        raise ValueError("between-relation grouping requires the sessions for speaker roles")
    totals: dict[object, set[tuple[str, object]]] = {}
    matched: dict[object, set[tuple[str, object]]] = {}

    def add(group: object, session_id: str, identity: object, is_match: bool) -> None:
        totals.setdefault(group, set()).add((session_id, identity))
        if is_match:
            matched.setdefault(group, set()).add((session_id, identity))

    for pred, ref in _aligned(predicted, reference):
        pred_ids = pred.pair_identities()
        if grouping is RecallGrouping.CATEGORY:
            for pair in ref.pairs:
                add(pair.category, ref.session_id, pair.identity(), pair.identity() in pred_ids)
        elif grouping is RecallGrouping.IN_PAIR_SHAPE:
            for pair in ref.pairs:
                if pair.answer_indices:
                    add(
                        classify_in_pair_shape(pair),
                        ref.session_id,
                        pair.identity(),
                        pair.identity() in pred_ids,
                    )
        else:
            assert sessions is not None
            session = sessions.get(ref.session_id)
            if session is None:
                raise SessionIdMismatchError(f"no session {ref.session_id!r} for relation grouping")
            pairs = ordered_pairs(ref)
            for p, q in zip(pairs, pairs[1:]):
                relation = relate_adjacent_pairs(p, q, session).relation
                for member in (p, q):
                    add(relation, ref.session_id, member.identity(), member.identity() in pred_ids)

    return {
        group: GroupRecall(matched=len(matched.get(group, set())), total=len(ids))
        for group, ids in totals.items()
    }


@dataclass(frozen=True)
class CorpusStats:
    """Descriptive statistics of a corpus of extracted (or gold) pairs.

    avg_us / avg_qs / avg_as are per-session means of utterance, question-
    utterance and answer-utterance counts; dist_qa is the mean per-pair
    distance between the first and last involved utterance (adjacent
    question and answer give 1); category_ratios are fractions over all pairs.
    """

    n_sessions: int
    avg_us: float
    avg_qs: float
    avg_as: float
    dist_qa: float
    category_ratios: dict[PairCategory, float]


def corpus_stats(corpus: Sequence[tuple[Session, ExtractionResult]]) -> CorpusStats:
    """Compute per-session and per-pair averages over (session, pairs) items."""
    n_sessions = len(corpus)
    total_utterances = 0
    total_questions = 0
    total_answers = 0
    span_sum = 0
    category_counts = {category: 0 for category in PairCategory}
    n_pairs = 0
    for session, result in corpus:
        total_utterances += len(session)
        for pair in result.pairs:
            total_questions += len(pair.question_indices)
            total_answers += len(pair.answer_indices)
            lo, hi = pair.span
            span_sum += hi - lo
            category_counts[pair.category] += 1
            n_pairs += 1
    return CorpusStats(
        n_sessions=n_sessions,
        avg_us=_safe_div(total_utterances, n_sessions),
        avg_qs=_safe_div(total_questions, n_sessions),
        avg_as=_safe_div(total_answers, n_sessions),
        dist_qa=_safe_div(span_sum, n_pairs),
        category_ratios={
            category: _safe_div(count, n_pairs) for category, count in category_counts.items()
        },
    )
