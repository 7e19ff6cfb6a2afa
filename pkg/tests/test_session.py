"""HTTP session service: journeys, error codes, journal, online/offline parity."""

import json

import pytest
from fastapi.testclient import TestClient

from poolwise import (Outcome, evaluate_exact, generate_instance,
                      greedy_dynamic_plan, realized_welfare)
from poolwise.serialize import instance_to_dict
from poolwise.session import SessionStore, create_app

from oracles import instance_mixed_priors


@pytest.fixture
def client():
    return TestClient(create_app())


def make_session(client, instance):
    resp = client.post("/sessions", json=instance_to_dict(instance))
    assert resp.status_code == 201
    return resp.json()


class TestJourney:
    def test_healthz(self, client):
        resp = client.get("/healthz")
        assert resp.status_code == 200 and resp.json() == {"status": "ok"}

    def test_create_reports_initial_state(self, client):
        inst = instance_mixed_priors()
        state = make_session(client, inst)
        assert state["history"] == []
        assert state["remaining_budget"] == 2
        # sure-healthy agent shapes beliefs but pays no welfare until a pool clears it
        assert state["marginals"] == [0.5562, 1.0, 0.12]
        assert state["confirmed_healthy"] == []
        assert state["welfare_so_far"] == 0.0

    def test_full_journey_negative_then_positive(self, client):
        inst = instance_mixed_priors()
        sid = make_session(client, inst)["id"]

        rec = client.get(f"/sessions/{sid}/recommendation").json()
        assert rec["value"] > 0
        out = client.post(f"/sessions/{sid}/outcomes",
                          json={"pool": rec["pool"], "result": "neg"}).json()
        assert out["newly_confirmed_healthy"] == rec["pool"]
        assert out["welfare_so_far"] == pytest.approx(
            sum(inst.agents[i].utility for i in rec["pool"]))
        assert out["remaining_budget"] == 1

        rec2 = client.get(f"/sessions/{sid}/recommendation").json()
        assert not set(rec2["pool"]) & set(rec["pool"])
        out2 = client.post(f"/sessions/{sid}/outcomes",
                           json={"pool": rec2["pool"], "result": "pos"}).json()
        assert out2["newly_confirmed_healthy"] == []
        assert out2["remaining_budget"] == 0
        assert client.get(f"/sessions/{sid}/recommendation").status_code == 409

    def test_operator_can_override_recommendation(self, client):
        inst = instance_mixed_priors()
        sid = make_session(client, inst)["id"]
        out = client.post(f"/sessions/{sid}/outcomes",
                          json={"pool": [0, 2], "result": "neg"})
        assert out.status_code == 200
        assert out.json()["newly_confirmed_healthy"] == [0, 2]

    def test_singleton_positive_confirms_infected(self, client):
        inst = instance_mixed_priors()
        sid = make_session(client, inst)["id"]
        out = client.post(f"/sessions/{sid}/outcomes",
                          json={"pool": [0], "result": "pos"}).json()
        assert out["newly_confirmed_infected"] == [0]
        assert out["marginals"][0] == 0.0

    def test_sessions_are_isolated(self, client):
        inst = instance_mixed_priors()
        a = make_session(client, inst)["id"]
        b = make_session(client, inst)["id"]
        assert a != b
        client.post(f"/sessions/{a}/outcomes", json={"pool": [0, 1], "result": "neg"})
        assert client.get(f"/sessions/{b}").json()["history"] == []
        assert len(client.get(f"/sessions/{a}").json()["history"]) == 1


class TestErrorCodes:
    def test_unknown_session(self, client):
        resp = client.get("/sessions/nope")
        assert resp.status_code == 404
        body = resp.json()
        assert body["code"] == "not_found" and body["message"]

    def test_bad_json_body(self, client):
        resp = client.post("/sessions", content=b"{oops",
                           headers={"content-type": "application/json"})
        assert resp.status_code == 400 and resp.json()["code"] == "bad_json"
        resp = client.post("/sessions", json=[1, 2])
        assert resp.status_code == 400 and resp.json()["code"] == "bad_json"

    def test_bad_instance(self, client):
        resp = client.post("/sessions", json={"agents": [], "B": 1, "G": 1})
        assert resp.status_code == 400 and resp.json()["code"] == "bad_instance"

    def test_bad_pool(self, client):
        sid = make_session(client, instance_mixed_priors())["id"]
        for pool in ([0, 9], [0, 0], [], [0, 1, 2]):  # out of range, dup, empty, over cap
            resp = client.post(f"/sessions/{sid}/outcomes",
                               json={"pool": pool, "result": "neg"})
            assert resp.status_code == 422 and resp.json()["code"] == "bad_pool"
        resp = client.post(f"/sessions/{sid}/outcomes",
                           json={"pool": "AB", "result": "neg"})
        assert resp.status_code == 422 and resp.json()["code"] == "bad_pool"

    def test_bad_outcome_payload(self, client):
        sid = make_session(client, instance_mixed_priors())["id"]
        resp = client.post(f"/sessions/{sid}/outcomes", json={"pool": [0]})
        assert resp.status_code == 422 and resp.json()["code"] == "bad_outcome"
        resp = client.post(f"/sessions/{sid}/outcomes",
                           json={"pool": [0], "result": "maybe"})
        assert resp.status_code == 422 and resp.json()["code"] == "bad_outcome"

    def test_inconsistent_outcome(self, client):
        sid = make_session(client, instance_mixed_priors())["id"]
        client.post(f"/sessions/{sid}/outcomes", json={"pool": [0, 1], "result": "neg"})
        resp = client.post(f"/sessions/{sid}/outcomes",
                           json={"pool": [0], "result": "pos"})
        assert resp.status_code == 422
        assert resp.json()["code"] == "inconsistent_outcome"
        # the failed append must not corrupt the session
        assert len(client.get(f"/sessions/{sid}").json()["history"]) == 1

    def test_budget_exhausted(self, client):
        sid = make_session(client, instance_mixed_priors())["id"]
        client.post(f"/sessions/{sid}/outcomes", json={"pool": [0], "result": "neg"})
        client.post(f"/sessions/{sid}/outcomes", json={"pool": [1], "result": "neg"})
        resp = client.post(f"/sessions/{sid}/outcomes",
                           json={"pool": [2], "result": "neg"})
        assert resp.status_code == 409 and resp.json()["code"] == "budget_exhausted"

    def test_nothing_to_test(self, client):
        inst = generate_instance(2, 3, 2, "uniform01", seed=8)
        sid = make_session(client, inst)["id"]
        client.post(f"/sessions/{sid}/outcomes", json={"pool": [0, 1], "result": "neg"})
        resp = client.get(f"/sessions/{sid}/recommendation")
        assert resp.status_code == 409 and resp.json()["code"] == "nothing_to_test"


class TestJournal:
    def test_events_are_appended_as_json_lines(self, tmp_path):
        journal = tmp_path / "journal.jsonl"
        client = TestClient(create_app(SessionStore(journal_path=journal)))
        inst = instance_mixed_priors()
        sid = make_session(client, inst)["id"]
        client.post(f"/sessions/{sid}/outcomes", json={"pool": [0, 1], "result": "neg"})
        client.post(f"/sessions/{sid}/outcomes", json={"pool": [2], "result": "pos"})
        events = [json.loads(line) for line in journal.read_text().splitlines()]
        assert [e["event"] for e in events] == ["create", "outcome", "outcome"]
        assert all(e["session"] == sid for e in events)
        assert events[0]["instance"] == instance_to_dict(inst)
        assert events[1] == {"event": "outcome", "pool": [0, 1],
                             "result": "neg", "session": sid}

    def test_rejected_outcomes_leave_no_event(self, tmp_path):
        journal = tmp_path / "journal.jsonl"
        client = TestClient(create_app(SessionStore(journal_path=journal)))
        sid = make_session(client, instance_mixed_priors())["id"]
        client.post(f"/sessions/{sid}/outcomes", json={"pool": [0, 9], "result": "neg"})
        events = [json.loads(line) for line in journal.read_text().splitlines()]
        assert [e["event"] for e in events] == ["create"]


class TestOnlineOfflineParity:
    def test_session_replay_matches_offline_tree(self, client):
        """Driving the service with a hidden health draw banks exactly the
        welfare the precomputed greedy tree realizes on that draw."""
        import numpy as np

        rng = np.random.default_rng(99)
        for trial in range(20):
            inst = generate_instance(5, 3, 3, "uniform01", seed=700 + trial)
            plan = greedy_dynamic_plan(inst, inference="exact")
            health = tuple(int(rng.random() < a.prior) for a in inst.agents)

            sid = make_session(client, inst)["id"]
            state = None
            while True:
                rec = client.get(f"/sessions/{sid}/recommendation")
                if rec.status_code == 409:
                    break
                pool = rec.json()["pool"]
                result = "neg" if all(health[i] for i in pool) else "pos"
                state = client.post(f"/sessions/{sid}/outcomes",
                                    json={"pool": pool, "result": result}).json()
            assert state is not None
            assert state["welfare_so_far"] == pytest.approx(
                realized_welfare(inst, plan, health), abs=1e-12)

    def test_expected_value_of_first_recommendation(self, client):
        inst = generate_instance(6, 1, 3, "uniform01", seed=41)
        sid = make_session(client, inst)["id"]
        rec = client.get(f"/sessions/{sid}/recommendation").json()
        plan = greedy_dynamic_plan(inst, inference="exact")
        assert rec["pool"] == list(plan.root.pool)
        # with budget one the step value is the whole plan's expected welfare
        assert rec["value"] == pytest.approx(
            evaluate_exact(inst, plan).expected_welfare, abs=1e-12)
