"""Acceptance gate: one test per criterion, each at its stated tolerance,
printing one pass/fail line (run with -s or -v to see them)."""

from __future__ import annotations

import json
import random
import string
import time
from contextlib import contextmanager
from pathlib import Path

import pytest

from qae.cli import EXIT_OK, main
from qae.codec import (
    PromptFormat,
    labels_to_pairs,
    normalize_labels,
    pairs_to_labels,
    parse_generated_output,
    parse_slot_labels,
    serialize_mask_prompt,
    serialize_sentinel_prompt,
)
from qae.core import PairCategory, Session
from qae.corpus import parse_surfaces, read_corpus
from qae.metrics import corpus_stats, session_metrics, utterance_metrics
from qae.pipeline import ExtractionMode, extract_end_to_end, extract_two_stage
from qae.store import ReviewRecord, ReviewStatus, ReviewStore
from qae.structure import classify_in_pair_shape, relate_adjacent_pairs

from .conftest import (
    STRUCTURE_FIXTURES,
    GenerativeOracle,
    labels,
    make_session,
    random_valid_extraction,
    structure_fixture,
)
from .oracles import oracle_session_scores, oracle_utterance_scores
from .test_store import states_equal
from .test_structure import EXPECTED_RELATIONS

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"
TOL = 1e-12

S1_REF = ["Q1", "O", "A1", "Q2", "A2", "O"]
S1_PRED = ["Q1", "A1", "A1", "Q2", "A2", "O"]


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] FAIL {name}")
        raise
    print(f"[ACCEPTANCE] PASS {name}")


def random_session(rng: random.Random, session_id: str) -> Session:
    n = rng.randint(1, 8)
    return make_session(
        session_id, [(rng.choice("CA"), f"utterance {i}") for i in range(n)]
    )


def random_surfaces(rng: random.Random, n: int) -> list[str]:
    vocabulary = ["O", "Q1", "Q2", "Q3", "A1", "A2", "A3"]
    return [rng.choice(vocabulary) for _ in range(n)]


def test_metric_oracle_equivalence():
    with criterion("metric oracle equivalence (>=200 random sessions, err <= 1e-12, < 5 s)"):
        rng = random.Random(0xA11CE)
        started = time.perf_counter()
        sessions, pred_lists, ref_lists = [], [], []
        for k in range(250):
            session = random_session(rng, f"s{k}")
            sessions.append(session)
            pred_lists.append(random_surfaces(rng, len(session)))
            ref_lists.append(random_surfaces(rng, len(session)))

        scores = utterance_metrics(
            [parse_surfaces(p) for p in pred_lists],
            [parse_surfaces(r) for r in ref_lists],
        )
        precision, recall, f1 = oracle_utterance_scores(pred_lists, ref_lists)
        assert abs(scores.precision - precision) <= TOL
        assert abs(scores.recall - recall) <= TOL
        assert abs(scores.f1 - f1) <= TOL

        pred_results = [
            labels_to_pairs(parse_surfaces(p), s) for p, s in zip(pred_lists, sessions)
        ]
        ref_results = [
            labels_to_pairs(parse_surfaces(r), s) for r, s in zip(ref_lists, sessions)
        ]
        session_scores = session_metrics(pred_results, ref_results)
        adoption, hit, session_f1 = oracle_session_scores(pred_lists, ref_lists)
        assert abs(session_scores.adoption_rate - adoption) <= TOL
        assert abs(session_scores.hit_rate - hit) <= TOL
        assert abs(session_scores.session_f1 - session_f1) <= TOL

        assert time.perf_counter() - started < 5.0


def test_worked_fixture_scores(s1):
    with criterion("worked fixture: P=0.8 R=1.0 F1=0.888..., AR=HR=S-F1=0.5"):
        scores = utterance_metrics([labels(S1_PRED)], [labels(S1_REF)])
        assert abs(scores.precision - 0.8) <= TOL
        assert abs(scores.recall - 1.0) <= TOL
        assert abs(scores.f1 - 8 / 9) <= TOL
        session_scores = session_metrics(
            [labels_to_pairs(labels(S1_PRED), s1)],
            [labels_to_pairs(labels(S1_REF), s1)],
        )
        assert abs(session_scores.adoption_rate - 0.5) <= TOL
        assert abs(session_scores.hit_rate - 0.5) <= TOL
        assert abs(session_scores.session_f1 - 0.5) <= TOL


def test_identity_bounds(s1):
    with criterion("identity bounds: exact 1s on identity, exact 0s on all-O"):
        reference = labels(S1_REF)
        ref_result = labels_to_pairs(reference, s1)
        top = utterance_metrics([reference], [reference])
        top_session = session_metrics([ref_result], [ref_result])
        assert (top.precision, top.recall, top.f1) == (1.0, 1.0, 1.0)
        assert (
            top_session.adoption_rate,
            top_session.hit_rate,
            top_session.session_f1,
        ) == (1.0, 1.0, 1.0)

        all_o = labels(["O"] * 6)
        bottom = utterance_metrics([all_o], [reference])
        bottom_session = session_metrics([labels_to_pairs(all_o, s1)], [ref_result])
        assert (bottom.precision, bottom.recall, bottom.f1) == (0.0, 0.0, 0.0)
        assert (
            bottom_session.adoption_rate,
            bottom_session.hit_rate,
            bottom_session.session_f1,
        ) == (0.0, 0.0, 0.0)


def test_codec_round_trip_properties():
    with criterion("codec round trip + idempotence + parse totality (>=1000 cases, < 10 s)"):
        rng = random.Random(0xC0DEC)
        started = time.perf_counter()
        for _ in range(1000):
            pairs, n = random_valid_extraction(rng)
            session = make_session(
                "rt", [(rng.choice("CA"), f"u{i}") for i in range(n)]
            )
            sequence = pairs_to_labels(pairs, n)
            result = labels_to_pairs(sequence, session)
            assert [(p.question_indices, p.answer_indices) for p in result.pairs] == [
                (p.question_indices, p.answer_indices) for p in pairs
            ]

        for _ in range(1000):
            surfaces = random_surfaces(rng, rng.randint(1, 10))
            once = normalize_labels(parse_surfaces(surfaces))
            assert normalize_labels(once).surfaces() == once.surfaces()

        alphabet = string.printable + "<extra_id_>"
        for _ in range(1000):
            n_slots = rng.randint(1, 10)
            text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 80)))
            decoded, _ = parse_generated_output(text, n_slots)
            assert len(decoded) == n_slots
            tokens = ["".join(rng.choice(alphabet) for _ in range(3)) for _ in range(rng.randint(0, 12))]
            decoded_slots, _ = parse_slot_labels(tokens, n_slots)
            assert len(decoded_slots) == n_slots

        assert time.perf_counter() - started < 10.0


def test_prompt_golden_files(s1):
    with criterion("prompt golden files byte-exact (mask/sentinel, plain and stage-2)"):
        stage2 = labels(["Q1", "O", "O", "Q2", "O", "O"])
        cases = [
            (serialize_mask_prompt(s1), "s1_mask.txt"),
            (serialize_mask_prompt(s1, stage2), "s1_mask_stage2.txt"),
            (serialize_sentinel_prompt(s1), "s1_sentinel.txt"),
            (serialize_sentinel_prompt(s1, stage2), "s1_sentinel_stage2.txt"),
        ]
        for prompt, name in cases:
            assert prompt.text.encode("utf-8") == (GOLDEN / name).read_bytes(), name


def test_structure_taxonomy():
    with criterion("structure taxonomy: 5/5 relation fixtures, 3/3 shape examples"):
        for name, expected in EXPECTED_RELATIONS.items():
            session, sequence = structure_fixture(name)
            result = labels_to_pairs(sequence, session)
            relation = relate_adjacent_pairs(result.pairs[0], result.pairs[1], session)
            assert relation.relation is expected, name

        from qae.core import QAPair
        from qae.structure import InPairShape

        shapes = [
            (QAPair(1, (1,), (3,)), InPairShape.DISJOINT),
            (QAPair(1, (2, 5), (4, 7)), InPairShape.OVERLAP_QA),
            (QAPair(1, (2, 8), (4, 7)), InPairShape.OVERLAP_QAQ),
        ]
        for pair, expected_shape in shapes:
            assert classify_in_pair_shape(pair) is expected_shape


def test_corpus_stats_on_bundled_mini_corpus():
    with criterion("stats: bundled mini corpus reproduces hand-computed values"):
        records = list(read_corpus(DATA / "mini_corpus.jsonl"))
        corpus = [(r.session, labels_to_pairs(r.labels, r.session)) for r in records]
        stats = corpus_stats(corpus)
        assert stats.avg_us == 6.0
        assert stats.avg_qs == 2.0
        assert stats.avg_as == 2.0
        assert stats.dist_qa == 1.5
        assert stats.category_ratios[PairCategory.ONE_ONE] == 1.0


def test_two_stage_equivalence(s1, s1_labels):
    with criterion("two-stage equivalence: oracle TwoStageGG == EndToEnd on every fixture"):
        fixtures: list[tuple[Session, object]] = [(s1, s1_labels)]
        for name in STRUCTURE_FIXTURES:
            fixtures.append(structure_fixture(name))
        rng = random.Random(0x75A6E)
        for k in range(50):
            pairs, n = random_valid_extraction(rng)
            session = make_session(f"rand{k}", [(rng.choice("CA"), f"u{i}") for i in range(n)])
            fixtures.append((session, pairs_to_labels(pairs, n)))

        for session, reference in fixtures:
            oracle = {session.session_id: reference}
            end_to_end = extract_end_to_end(
                session, GenerativeOracle(oracle), PromptFormat.SENTINEL_SEMICOLON
            )
            two_stage = extract_two_stage(
                session,
                GenerativeOracle(oracle, stage="questions"),
                GenerativeOracle(oracle),
                ExtractionMode.TWO_STAGE_GG,
            )
            assert end_to_end.pair_identities() == two_stage.pair_identities(), session.session_id


def synthetic_corpus_line(rng: random.Random, k: int) -> dict:
    n = rng.randint(4, 10)
    utterances = []
    for i in range(n):
        role = "C" if i % 2 == 0 else "A"
        asks = rng.random() < 0.35
        text = f"{'question' if asks else 'statement'} {k}-{i}" + ("?" if asks else ".")
        utterances.append({"role": role, "text": text})
    return {"session_id": f"synthetic-{k:04d}", "utterances": utterances}


def test_batch_determinism(tmp_path):
    with criterion("batch determinism: heuristic extract twice on 1000 sessions, byte-identical, < 30 s"):
        rng = random.Random(0xBA7C4)
        corpus = tmp_path / "corpus.jsonl"
        with corpus.open("w", encoding="utf-8") as fp:
            for k in range(1000):
                fp.write(json.dumps(synthetic_corpus_line(rng, k)) + "\n")

        started = time.perf_counter()
        outputs = []
        for run in range(2):
            out = tmp_path / f"run{run}.jsonl"
            code = main(
                ["extract", "--input", str(corpus), "--output", str(out),
                 "--tagger", "heuristic", "--workers", "4"]
            )
            assert code == EXIT_OK
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]
        assert len(outputs[0].splitlines()) == 1000
        assert time.perf_counter() - started < 30.0


def test_store_recovery(tmp_path):
    with criterion("store recovery: replay after crash mid-batch of 100 reviews; 3acc+1rej = 0.75"):
        directory = tmp_path / "store"
        store = ReviewStore(directory)
        rng = random.Random(0x57013)
        total_pairs = 0
        k = 0
        while total_pairs < 120:
            session = make_session(
                f"bulk{k}",
                [("C", f"question {k}-{i}?") if i % 2 == 0 else ("A", f"answer {k}-{i}")
                 for i in range(8)],
            )
            surfaces = ["Q1", "A1", "Q2", "A2", "Q3", "A3", "Q4", "A4"]
            store.ingest(session, labels_to_pairs(parse_surfaces(surfaces), session))
            total_pairs += 4
            k += 1

        pending = store.list_pending(size=500).items
        for item in pending[:100]:
            status = ReviewStatus.ACCEPTED if rng.random() < 0.6 else ReviewStatus.REJECTED
            store.record_review(
                ReviewRecord(item.session.session_id, item.pair.pair_id, status, reviewer="r")
            )
        # simulated crash: the handle is dropped without close()
        replayed = ReviewStore(directory)
        assert states_equal(store, replayed)
        assert len(replayed._reviews) == 100
        replayed.close()
        store.close()

        fresh_dir = tmp_path / "fresh"
        fresh = ReviewStore(fresh_dir)
        session = make_session(
            "adoption",
            [("C", f"q{i}?") if i % 2 == 0 else ("A", f"a{i}") for i in range(8)],
        )
        fresh.ingest(
            session,
            labels_to_pairs(
                parse_surfaces(["Q1", "A1", "Q2", "A2", "Q3", "A3", "Q4", "A4"]), session
            ),
        )
        for pair_id, status in enumerate(
            [ReviewStatus.ACCEPTED, ReviewStatus.ACCEPTED, ReviewStatus.ACCEPTED,
             ReviewStatus.REJECTED],
            start=1,
        ):
            fresh.record_review(ReviewRecord("adoption", pair_id, status, reviewer="r"))
        assert fresh.adoption_report().adoption_rate == pytest.approx(0.75, abs=TOL)
        fresh.close()
