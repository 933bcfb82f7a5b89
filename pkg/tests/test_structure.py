from __future__ import annotations

import random

import pytest

from qae.codec import labels_to_pairs
from qae.core import QAPair, SpeakerRole
from qae.structure import (
    BetweenRelation,
    EmptyUnionError,
    IdenticalSpansError,
    InPairShape,
    classify_in_pair_shape,
    questioner_of,
    relate_adjacent_pairs,
    session_structure_profile,
)

from .conftest import STRUCTURE_FIXTURES, labels, make_session, structure_fixture


class TestQuestionerOf:
    def test_single_utterance(self, s1, s1_pairs):
        assert questioner_of(s1_pairs[0], s1) is SpeakerRole.CUSTOMER

    def test_majority_wins_over_minority_agent(self):
        # a question union {1 (C), 3 (C), 23 (A)} stays with the customer
        turns = [("A" if i + 1 == 23 else "C", f"turn {i + 1}") for i in range(24)]
        session = make_session("maj", turns)
        pair = QAPair(1, question_indices=(1, 3, 23), answer_indices=(24,))
        assert questioner_of(pair, session) is SpeakerRole.CUSTOMER

    def test_tie_breaks_to_earliest(self):
        session = make_session("tie", [("C", "a"), ("A", "b?"), ("A", "c"), ("C", "d?")])
        pair = QAPair(1, question_indices=(2, 4))  # A at 2, C at 4 -> tie -> role of 2
        assert questioner_of(pair, session) is SpeakerRole.AGENT


EXPECTED_RELATIONS = {
    "f_sf": BetweenRelation.SEQUENTIAL_FLOW,
    "f_fis": BetweenRelation.FOLLOW_UP_INFORMATION_SEEKING,
    "f_cc": BetweenRelation.CLARIFICATION_CONFIRMATION,
    "f_bi": BetweenRelation.BARGE_IN,
    "f_ed": BetweenRelation.ELABORATION,
}


class TestRelateAdjacentPairs:
    @pytest.mark.parametrize("name", sorted(STRUCTURE_FIXTURES))
    def test_fixture_classification(self, name):
        session, label_sequence = structure_fixture(name)
        result = labels_to_pairs(label_sequence, session)
        assert len(result.pairs) == 2
        relation = relate_adjacent_pairs(result.pairs[0], result.pairs[1], session)
        assert relation.relation is EXPECTED_RELATIONS[name]
        assert not relation.irregular_overlap

    def test_identical_spans_rejected(self, s1):
        p = QAPair(1, question_indices=(2,), answer_indices=(5,))
        q = QAPair(2, question_indices=(2,), answer_indices=(5,))
        with pytest.raises(IdenticalSpansError):
            relate_adjacent_pairs(p, q, s1)

    def test_order_precondition_enforced(self, s1, s1_pairs):
        with pytest.raises(ValueError):
            relate_adjacent_pairs(s1_pairs[1], s1_pairs[0], s1)

    def test_irregular_overlap_defaults_to_elaboration(self):
        # q's answer precedes p's whole span: not disjoint/nested/crossing
        session = make_session("irr", [("A", "a"), ("C", "b?"), ("A", "c"), ("C", "d?")])
        p = QAPair(1, question_indices=(2,), answer_indices=(3,))
        q = QAPair(2, question_indices=(4,), answer_indices=(1,))
        relation = relate_adjacent_pairs(p, q, session)
        assert relation.relation is BetweenRelation.ELABORATION
        assert relation.irregular_overlap

    def test_semantics_free(self):
        # shuffling texts never changes the relation
        session, label_sequence = structure_fixture("f_cc")
        result = labels_to_pairs(label_sequence, session)
        rng = random.Random(7)
        texts = [u.text for u in session]
        rng.shuffle(texts)
        shuffled = make_session(
            "shuffled", [(u.role.value, t) for u, t in zip(session, texts)]
        )
        assert (
            relate_adjacent_pairs(result.pairs[0], result.pairs[1], session).relation
            is relate_adjacent_pairs(result.pairs[0], result.pairs[1], shuffled).relation
        )


class TestInPairShape:
    @pytest.mark.parametrize(
        "questions,answers,expected",
        [
            ((1,), (3,), InPairShape.DISJOINT),
            ((2, 5), (4, 7), InPairShape.OVERLAP_QA),
            ((2, 8), (4, 7), InPairShape.OVERLAP_QAQ),
        ],
    )
    def test_shape_rules(self, questions, answers, expected):
        pair = QAPair(1, question_indices=questions, answer_indices=answers)
        assert classify_in_pair_shape(pair) is expected

    def test_empty_union_rejected(self):
        with pytest.raises(EmptyUnionError):
            classify_in_pair_shape(QAPair(1, question_indices=(1,)))

    def test_partitions_pairs(self):
        rng = random.Random(13)
        for _ in range(200):
            n = rng.randint(2, 10)
            indices = list(range(1, n + 1))
            rng.shuffle(indices)
            q_size = rng.randint(1, n - 1)
            questions = tuple(sorted(indices[:q_size]))
            answers = tuple(sorted(indices[q_size : q_size + rng.randint(1, n - q_size)]))
            pair = QAPair(1, question_indices=questions, answer_indices=answers)
            shape = classify_in_pair_shape(pair)
            disjoint = max(questions) < min(answers)
            assert (shape is InPairShape.DISJOINT) == disjoint


class TestSessionStructureProfile:
    def test_s1_profile(self, s1, s1_labels):
        result = labels_to_pairs(s1_labels, s1)
        profile = session_structure_profile([(s1, result)])
        assert profile.relation_counts[BetweenRelation.SEQUENTIAL_FLOW] == 1
        assert sum(profile.relation_counts.values()) == 1
        assert profile.shape_counts[InPairShape.DISJOINT] == 2
        assert profile.relation_sequences["s1"] == (BetweenRelation.SEQUENTIAL_FLOW,)

    def test_single_pair_session_has_no_relations(self):
        session = make_session("solo", [("C", "why?"), ("A", "because")])
        result = labels_to_pairs(labels(["Q1", "A1"]), session)
        profile = session_structure_profile([(session, result)])
        assert sum(profile.relation_counts.values()) == 0
        assert profile.relation_sequences["solo"] == ()

    def test_five_fixture_corpus_uniform_fractions(self):
        corpus = []
        for name in STRUCTURE_FIXTURES:
            session, label_sequence = structure_fixture(name)
            corpus.append((session, labels_to_pairs(label_sequence, session)))
        profile = session_structure_profile(corpus)
        assert all(count == 1 for count in profile.relation_counts.values())
        assert all(abs(f - 0.2) < 1e-12 for f in profile.relation_fractions.values())

    def test_fractions_invariant_under_reordering(self):
        corpus = []
        for name in STRUCTURE_FIXTURES:
            session, label_sequence = structure_fixture(name)
            corpus.append((session, labels_to_pairs(label_sequence, session)))
        forward = session_structure_profile(corpus)
        backward = session_structure_profile(list(reversed(corpus)))
        assert forward.relation_fractions == backward.relation_fractions
        assert forward.shape_fractions == backward.shape_fractions
