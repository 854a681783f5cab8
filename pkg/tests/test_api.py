"""HTTP surface: endpoints, status mapping, ISO timestamps, end-to-end flow."""

import pytest
from fastapi.testclient import TestClient

from cellcrowd.orchestrator import Orchestrator, OrchestratorConfig
from cellcrowd.orchestrator.api import create_app

T0 = "2026-01-05T00:00:00Z"
T0_PLUS_HOUR = "2026-01-05T01:00:00Z"


@pytest.fixture()
def client():
    orchestrator = Orchestrator(OrchestratorConfig(), clock=lambda: 0.0)
    return TestClient(create_app(orchestrator))


def register(client, worker_id, rate=0.95, master=True):
    r = client.post(
        "/workers",
        json={"worker_id": worker_id, "is_master": master, "approval_rate": rate, "now": T0},
    )
    assert r.status_code == 201, r.text
    return r.json()


def make_batch(client, n=2, with_labels=True):
    items = [
        {"item_id": f"i{k}", "label": "circular" if with_labels else None}
        for k in range(n)
    ]
    r = client.post("/batches", json={"items": items, "now": T0})
    assert r.status_code == 201, r.text
    return r.json()


def test_health(client):
    r = client.get("/healthz")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_worker_registration_and_lookup(client):
    register(client, "w1")
    r = client.get("/workers/w1")
    assert r.status_code == 200
    assert r.json()["approval_rate"] == pytest.approx(0.95)
    assert client.get("/workers/none").status_code == 404


def test_claim_submit_flow(client):
    register(client, "w1")
    make_batch(client, 2)
    r = client.get("/assignments/next", params={"worker_id": "w1", "now": T0})
    assert r.status_code == 200
    body = r.json()
    assert body["items"] == ["i0", "i1"]
    assert body["deadline"] == T0_PLUS_HOUR
    r = client.post(
        f"/assignments/{body['assignment_id']}/submit",
        json={"answers": {"i0": "circular", "i1": "elongated"}, "now": "2026-01-05T00:30:00Z"},
    )
    assert r.status_code == 200
    receipt = r.json()
    assert receipt["pending_cents"] == 1
    assert receipt["balance_cents"] == 0
    # no more tasks for this worker
    r = client.get("/assignments/next", params={"worker_id": "w1", "now": T0})
    assert r.status_code == 204


def test_unqualified_claim_is_403(client):
    register(client, "low", rate=0.85)
    make_batch(client, 2)
    r = client.get("/assignments/next", params={"worker_id": "low", "now": T0})
    assert r.status_code == 403
    assert r.json()["error"] == "NotQualified"


def test_late_submission_is_410(client):
    register(client, "w1")
    make_batch(client, 2)
    a = client.get("/assignments/next", params={"worker_id": "w1", "now": T0}).json()
    r = client.post(
        f"/assignments/{a['assignment_id']}/submit",
        json={"answers": {"i0": "other", "i1": "other"}, "now": "2026-01-05T01:00:01Z"},
    )
    assert r.status_code == 410


def test_bad_label_is_422(client):
    register(client, "w1")
    make_batch(client, 2)
    a = client.get("/assignments/next", params={"worker_id": "w1", "now": T0}).json()
    r = client.post(
        f"/assignments/{a['assignment_id']}/submit",
        json={"answers": {"i0": "square", "i1": "other"}, "now": T0},
    )
    assert r.status_code == 422


def test_task_and_batch_views(client):
    register(client, "w1")
    batch = make_batch(client, 2)
    task_id = batch["task_ids"][0]
    r = client.get(f"/tasks/{task_id}")
    assert r.status_code == 200
    assert r.json()["state"] == "open"
    assert r.json()["votes"] == {"i0": 0, "i1": 0}
    r = client.get(f"/batches/{batch['batch_id']}")
    assert r.status_code == 200
    assert r.json()["n_tasks"] == 1
    assert client.get("/tasks/ghost").status_code == 404


def test_sweep_endpoint(client):
    register(client, "w1")
    make_batch(client, 2)
    a = client.get("/assignments/next", params={"worker_id": "w1", "now": T0}).json()
    client.post(
        f"/assignments/{a['assignment_id']}/submit",
        json={"answers": {"i0": "circular", "i1": "circular"}, "now": T0},
    )
    r = client.post("/admin/sweep", params={"now": "2026-01-12T00:00:01Z"})
    assert r.status_code == 200
    assert r.json()["auto_approved"] == [a["assignment_id"]]
    assert client.get("/workers/w1").json()["balance_cents"] == 1


def test_full_task_yields_consensus_and_report(client):
    for i in range(5):
        register(client, f"w{i}")
    batch = make_batch(client, 2)
    labels = ["circular", "circular", "circular", "elongated", "other"]
    for i, lab in enumerate(labels):
        a = client.get("/assignments/next", params={"worker_id": f"w{i}", "now": T0}).json()
        r = client.post(
            f"/assignments/{a['assignment_id']}/submit",
            json={"answers": {"i0": lab, "i1": "circular"}, "now": T0},
        )
        assert r.status_code == 200
    status = client.get(f"/tasks/{batch['task_ids'][0]}").json()
    assert status["state"] == "complete"
    assert status["consensus"]["i0"]["label"] == "circular"
    assert status["consensus"]["i0"]["agreement"] == 3

    votes_csv = client.get(f"/batches/{batch['batch_id']}/votes.csv")
    assert votes_csv.status_code == 200
    assert len(votes_csv.text.strip().splitlines()) == 11  # header + 10 votes

    report = client.get(f"/batches/{batch['batch_id']}/report")
    assert report.status_code == 200
    body = report.json()
    assert body["pattern_histogram"]["3-*"] == 1
    assert body["pattern_histogram"]["5"] == 1
    text = client.get(f"/batches/{batch['batch_id']}/report", params={"format": "text"})
    assert "Metrics, 3 classes" in text.text


def test_report_without_truth_is_409(client):
    register(client, "w1")
    items = [{"item_id": "x0"}, {"item_id": "x1"}]
    r = client.post("/batches", json={"items": items, "now": T0})
    batch_id = r.json()["batch_id"]
    assert client.get(f"/batches/{batch_id}/report").status_code == 409


def test_missing_image_404(client):
    make_batch(client, 2)
    assert client.get("/items/i0/image").status_code == 404
