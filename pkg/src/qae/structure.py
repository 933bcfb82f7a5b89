"""Dialogue-structure classification over extracted QA pairs.

Two families of signal: how consecutive pairs in a session relate to each
other (sequential flow, follow-up, clarification, barge-in, elaboration) and
how a single pair's question and answer utterances interleave (disjoint or
overlapping). Both are strictly positional: they depend only on index sets
and speaker roles, never on utterance text.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .core import ExtractionResult, QaeError, QAPair, Session, SpeakerRole


class EmptyUnionError(QaeError):
    """In-pair shape is undefined when either union is empty."""


class IdenticalSpansError(QaeError):
    """Two pairs with identical spans cannot be related positionally."""


class BetweenRelation(Enum):
    """How one QA pair relates to the next one in the session."""

    SEQUENTIAL_FLOW = "SF"
    FOLLOW_UP_INFORMATION_SEEKING = "FIS"
    CLARIFICATION_CONFIRMATION = "CC"
    BARGE_IN = "BI"
    ELABORATION = "ED"


class InPairShape(Enum):
    """Positional interleaving of question and answer utterances in one pair."""

    DISJOINT = "disjoint"
    OVERLAP_QA = "overlap_qa"
    OVERLAP_QAQ = "overlap_qaq"


@dataclass(frozen=True)
class PairRelation:
    """A classified relation; ``irregular_overlap`` marks span geometries
    beyond clean nesting/crossing that were defaulted to elaboration."""

    relation: BetweenRelation
    irregular_overlap: bool = False


def questioner_of(pair: QAPair, session: Session) -> SpeakerRole:
    """Majority speaker role over the question union; ties go to the role of
    the earliest question utterance. Needed because unions may mix roles."""
    roles = [session.role_of(i) for i in pair.question_indices]
    customers = sum(1 for r in roles if r is SpeakerRole.CUSTOMER)
    agents = len(roles) - customers
    if customers != agents:
        return SpeakerRole.CUSTOMER if customers > agents else SpeakerRole.AGENT
    return roles[0]


def relate_adjacent_pairs(p: QAPair, q: QAPair, session: Session) -> PairRelation:
    """Classify the relation between two consecutive pairs.

    With span(x) = [min, max] over the combined unions and p preceding q by
    smallest question index:

    - disjoint spans: SEQUENTIAL_FLOW when both pairs have the same
      questioner, FOLLOW_UP_INFORMATION_SEEKING when the questioner switches;
    - span(q) strictly nested in span(p): CLARIFICATION_CONFIRMATION when the
      questioners differ, BARGE_IN when they are the same;
    - crossing spans: ELABORATION;
    - any other overlap: ELABORATION with the irregular flag set.
    """
    if min(q.question_indices) < min(p.question_indices):
        raise ValueError("pairs must be ordered by smallest question index")
    p_lo, p_hi = p.span
    q_lo, q_hi = q.span
    if (p_lo, p_hi) == (q_lo, q_hi):
        raise IdenticalSpansError(f"pairs {p.pair_id} and {q.pair_id} have identical spans")

    same_questioner = questioner_of(p, session) is questioner_of(q, session)
    if p_hi < q_lo:
        return PairRelation(
            BetweenRelation.SEQUENTIAL_FLOW
            if same_questioner
            else BetweenRelation.FOLLOW_UP_INFORMATION_SEEKING
        )
    if p_lo < q_lo and q_hi < p_hi:
        return PairRelation(
            BetweenRelation.BARGE_IN if same_questioner else BetweenRelation.CLARIFICATION_CONFIRMATION
        )
    if p_lo < q_lo <= p_hi < q_hi:
        return PairRelation(BetweenRelation.ELABORATION)
    return PairRelation(BetweenRelation.ELABORATION, irregular_overlap=True)


def classify_in_pair_shape(pair: QAPair) -> InPairShape:
    """Shape of one pair: disjoint when all question utterances precede all
    answer utterances, otherwise split by whether the pair's last utterance
    is an answer (OVERLAP_QA) or a question (OVERLAP_QAQ)."""
    if not pair.question_indices or not pair.answer_indices:
        raise EmptyUnionError(f"pair {pair.pair_id} needs both unions for shape classification")
    if max(pair.question_indices) < min(pair.answer_indices):
        return InPairShape.DISJOINT
    last = max(pair.question_indices + pair.answer_indices)
    return InPairShape.OVERLAP_QA if last in pair.answer_indices else InPairShape.OVERLAP_QAQ


@dataclass(frozen=True)
class StructureProfile:
    """Corpus-level distribution of between-pair relations and in-pair shapes."""

    relation_counts: dict[BetweenRelation, int]
    relation_fractions: dict[BetweenRelation, float]
    shape_counts: dict[InPairShape, int]
    shape_fractions: dict[InPairShape, float]
    relation_sequences: dict[str, tuple[BetweenRelation, ...]]
    irregular_overlaps: int


def ordered_pairs(result: ExtractionResult) -> list[QAPair]:
    """Pairs sorted by smallest question index (the canonical session order)."""
    return sorted(result.pairs, key=lambda pair: min(pair.question_indices))


def session_relations(session: Session, result: ExtractionResult) -> list[PairRelation]:
    """Relation for every consecutive pair of QA pairs in one session."""
    pairs = ordered_pairs(result)
    return [relate_adjacent_pairs(p, q, session) for p, q in zip(pairs, pairs[1:])]


def session_structure_profile(
    results: Sequence[tuple[Session, ExtractionResult]] | Mapping[str, tuple[Session, ExtractionResult]],
) -> StructureProfile:
    """Aggregate relations (over consecutive pairs) and shapes (over pairs
    with both unions non-empty) across a corpus."""
    items = list(results.values()) if isinstance(results, Mapping) else list(results)
    relation_counts = {relation: 0 for relation in BetweenRelation}
    shape_counts = {shape: 0 for shape in InPairShape}
    sequences: dict[str, tuple[BetweenRelation, ...]] = {}
    irregular = 0
    for session, result in items:
        relations = session_relations(session, result)
        sequences[session.session_id] = tuple(r.relation for r in relations)
        for r in relations:
            relation_counts[r.relation] += 1
            if r.irregular_overlap:
                irregular += 1
        for pair in result.pairs:
            if pair.answer_indices:
                shape_counts[classify_in_pair_shape(pair)] += 1
    total_relations = sum(relation_counts.values())
    total_shapes = sum(shape_counts.values())
    return StructureProfile(
        relation_counts=relation_counts,
        relation_fractions={
            k: (v / total_relations if total_relations else 0.0) for k, v in relation_counts.items()
        },
        shape_counts=shape_counts,
        shape_fractions={
            k: (v / total_shapes if total_shapes else 0.0) for k, v in shape_counts.items()
        },
        relation_sequences=sequences,
        irregular_overlaps=irregular,
    )
