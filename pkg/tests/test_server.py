from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from qae.codec import labels_to_pairs
from qae.server import create_app
from qae.store import ReviewStore


@pytest.fixture
def client(tmp_path, s1, s1_labels):
    store = ReviewStore(tmp_path / "store")
    store.ingest(s1, labels_to_pairs(s1_labels, s1))
    app = create_app(store)
    with TestClient(app) as test_client:
        yield test_client


def accept(client: TestClient, pair_id: int, **extra) -> object:
    return client.post(
        "/api/reviews",
        json={"session_id": "s1", "pair_id": pair_id, "decision": "accept",
              "reviewer": "tester", **extra},
    )


class TestPendingEndpoint:
    def test_lists_pending_pairs(self, client):
        payload = client.get("/api/pending").json()
        assert len(payload["items"]) == 2
        assert payload["next_cursor"] is None
        first = payload["items"][0]
        assert first["pair"]["category"] == "1-1"
        assert first["question_text"] == "Hi, my package hasn't arrived?"
        assert first["answer_text"] == "It will arrive tomorrow."
        assert len(first["utterances"]) == 6

    def test_pagination_cursor(self, client):
        first_page = client.get("/api/pending", params={"size": 1}).json()
        assert len(first_page["items"]) == 1
        assert first_page["next_cursor"]
        second_page = client.get(
            "/api/pending", params={"size": 1, "cursor": first_page["next_cursor"]}
        ).json()
        assert len(second_page["items"]) == 1
        assert second_page["next_cursor"] is None

    def test_bad_cursor_is_400(self, client):
        response = client.get("/api/pending", params={"cursor": "bogus"})
        assert response.status_code == 400


class TestReviewEndpoint:
    def test_accept_then_queue_shrinks(self, client):
        assert accept(client, 1).status_code == 200
        remaining = client.get("/api/pending").json()["items"]
        assert [item["pair"]["pair_id"] for item in remaining] == [2]

    def test_double_review_conflicts(self, client):
        assert accept(client, 1).status_code == 200
        second = client.post(
            "/api/reviews",
            json={"session_id": "s1", "pair_id": 1, "decision": "reject"},
        )
        assert second.status_code == 409

    def test_concurrent_posts_one_winner(self, client):
        import threading

        codes: list[int] = []

        def submit(decision: str) -> None:
            response = client.post(
                "/api/reviews",
                json={"session_id": "s1", "pair_id": 2, "decision": decision},
            )
            codes.append(response.status_code)

        threads = [threading.Thread(target=submit, args=(d,)) for d in ("accept", "reject")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(codes) == [200, 409]

    def test_unknown_pair_is_404(self, client):
        assert accept(client, 42).status_code == 404

    def test_bad_decision_is_400(self, client):
        response = client.post(
            "/api/reviews", json={"session_id": "s1", "pair_id": 1, "decision": "maybe"}
        )
        assert response.status_code == 400

    def test_edit_requires_texts(self, client):
        response = client.post(
            "/api/reviews",
            json={"session_id": "s1", "pair_id": 1, "decision": "edit",
                  "question_text": "q", "answer_text": "   "},
        )
        assert response.status_code == 400

    def test_edit_round_trip(self, client):
        response = client.post(
            "/api/reviews",
            json={"session_id": "s1", "pair_id": 1, "decision": "edit",
                  "question_text": "Where is my parcel?", "answer_text": "Tomorrow."},
        )
        assert response.status_code == 200
        assert response.json()["review"]["status"] == "edited"


class TestAdoptionEndpoint:
    def test_gauge_after_accept_and_reject(self, client):
        accept(client, 1)
        client.post(
            "/api/reviews", json={"session_id": "s1", "pair_id": 2, "decision": "reject"}
        )
        gauge = client.get("/api/metrics/adoption").json()
        assert gauge["accepted"] == 1
        assert gauge["rejected"] == 1
        assert gauge["adoption_rate"] == pytest.approx(0.5)
        assert gauge["pending"] == 0

    def test_empty_store_gauge(self, tmp_path):
        store = ReviewStore(tmp_path / "store")
        with TestClient(create_app(store)) as client:
            gauge = client.get("/api/metrics/adoption").json()
        assert gauge["adoption_rate"] == 0.0


class TestSessionEndpoint:
    def test_transcript_with_pairs(self, client):
        payload = client.get("/api/sessions/s1").json()
        assert payload["session_id"] == "s1"
        assert len(payload["utterances"]) == 6
        assert [p["pair_id"] for p in payload["pairs"]] == [1, 2]

    def test_unknown_session_is_404(self, client):
        assert client.get("/api/sessions/ghost").status_code == 404


def test_review_persists_across_restart(tmp_path, s1, s1_labels):
    store_dir = tmp_path / "store"
    store = ReviewStore(store_dir)
    store.ingest(s1, labels_to_pairs(s1_labels, s1))
    with TestClient(create_app(store)) as client:
        assert accept(client, 1).status_code == 200

    reopened = ReviewStore(store_dir)
    with TestClient(create_app(reopened)) as client:
        items = client.get("/api/pending").json()["items"]
        assert [item["pair"]["pair_id"] for item in items] == [2]
        gauge = client.get("/api/metrics/adoption").json()
        assert gauge["accepted"] == 1
