from __future__ import annotations

import hashlib
import threading
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from speca import bundled, pipeline
from speca.runstore import RunStore
from speca.service_api import build_app


@pytest.fixture()
def service(tmp_path):
    runs_root = tmp_path / "runs"
    # pipeline run over the bundled corpus plus both contest-fixture runs
    pipeline.build_demo_runs(runs_root)
    # pre-triage the v1 run to the contest verdicts so reports resolve
    store = RunStore(runs_root, "v1")
    app = build_app(runs_root)
    return TestClient(app), runs_root, store


def test_runs_listing_empty_store(tmp_path):
    client = TestClient(build_app(tmp_path / "nothing"))
    response = client.get("/v1/runs")
    assert response.status_code == 200
    assert response.json() == []


def test_runs_listing_and_detail(service):
    client, _, _ = service
    runs = client.get("/v1/runs").json()
    ids = {r["run_id"] for r in runs}
    assert {"demo", "v1", "v1-queue"} <= ids
    detail = client.get("/v1/runs/v1").json()
    assert detail["counters"]["findings_total"] == 54
    assert client.get("/v1/runs/ghost").status_code == 404


def test_findings_filter_and_view_fields(service):
    client, _, _ = service
    all_findings = client.get("/v1/runs/demo/findings").json()
    assert len(all_findings) == 3
    assert all(f["requirement_text"] for f in all_findings)
    mapped = [f for f in all_findings if f["location"]["path"]]
    assert all(f["excerpt"] for f in mapped)
    nhv = client.get("/v1/runs/v1-queue/findings",
                     params={"status": "NEEDS_HUMAN_VERIFICATION"}).json()
    assert len(nhv) == 54


def test_triage_poc_required_is_422(service):
    client, _, _ = service
    response = client.post("/v1/findings/F-v1-queue-0001/triage",
                           json={"verdict": "VALID", "poc_attached": False})
    assert response.status_code == 422
    body = response.json()
    assert body["title"] == "PoCRequired"
    ok = client.post("/v1/findings/F-v1-queue-0001/triage",
                     json={"verdict": "VALID", "poc_attached": True})
    assert ok.status_code == 200
    assert ok.json()["status"] == "VALID"


def test_triage_conflict_is_409(service):
    client, _, _ = service
    first = client.post("/v1/findings/F-v1-queue-0002/triage",
                        json={"verdict": "VALID"})
    assert first.status_code == 200
    second = client.post("/v1/findings/F-v1-queue-0002/triage",
                         json={"verdict": "INVALID",
                               "fp_category": "out_of_scope"})
    assert second.status_code == 409


def test_concurrent_triage_single_winner(service):
    client, _, _ = service
    codes = []

    def submit(category):
        response = client.post(
            "/v1/findings/F-v1-queue-0003/triage",
            json={"verdict": "INVALID", "fp_category": category})
        codes.append(response.status_code)

    threads = [threading.Thread(target=submit, args=(c,))
               for c in ("out_of_scope", "incorrect_analysis",
                         "already_known_duplicate", "out_of_scope")]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(codes) == [200, 409, 409, 409]


def test_triage_idempotency_key_replay(service):
    client, _, _ = service
    headers = {"Idempotency-Key": "abc-1"}
    first = client.post("/v1/findings/F-v1-queue-0004/triage",
                        json={"verdict": "VALID"}, headers=headers)
    second = client.post("/v1/findings/F-v1-queue-0004/triage",
                         json={"verdict": "VALID"}, headers=headers)
    assert first.status_code == second.status_code == 200
    assert first.json() == second.json()


def test_propagate_requires_valid_and_returns_created(service):
    client, _, _ = service
    pending = client.post("/v1/findings/F-demo-0001/propagate")
    assert pending.status_code == 409
    triaged = client.post("/v1/findings/F-demo-0001/triage",
                          json={"verdict": "VALID", "poc_attached": True})
    assert triaged.status_code == 200
    response = client.post("/v1/findings/F-demo-0001/propagate")
    assert response.status_code == 202
    body = response.json()
    assert body["source_finding_id"] == "F-demo-0001"
    assert isinstance(body["created"], list)


def test_threat_model_get_put_and_validation(service):
    client, _, _ = service
    model = client.get("/v1/runs/v1/threat-model").json()
    assert {a["actor_id"] for a in model["actors"]} >= {"external_peer", "el_client"}
    bad = dict(model)
    bad["edges"] = model["edges"] + [{"from_actor": "ghost", "to_actor": "cl_client",
                                      "channel": "x", "crossing_trust": "UNTRUSTED"}]
    response = client.put("/v1/runs/v1/threat-model", json=bad)
    assert response.status_code == 422
    assert response.json()["title"] == "DanglingEdge"
    flipped = dict(model)
    flipped["actors"] = [
        {**a, "trust": "UNTRUSTED"} if a["actor_id"] == "el_client" else a
        for a in model["actors"]]
    response = client.put("/v1/runs/v1/threat-model", json=flipped)
    assert response.status_code == 200
    assert client.get("/v1/runs/v1/threat-model").json() == flipped


def test_report_endpoints_reproduce_fixture_tables(service):
    client, _, _ = service
    attribution = client.get("/v1/runs/v1/reports/attribution").json()
    by_strategy = {r["strategy"]: r["pct"] for r in attribution["rows"]}
    assert by_strategy["B_cross_impl"] == pytest.approx(76.5)
    assert by_strategy["A_static"] == pytest.approx(17.6)
    assert by_strategy["C_dynamic"] == pytest.approx(5.9)

    fp = client.get("/v1/runs/v1/reports/fp").json()
    by_cat = {r["category"]: r["pct"] for r in fp["rows"]}
    assert by_cat["threat_model_misalignment"] == pytest.approx(56.8)

    summary = client.get("/v1/runs/v1/reports/summary").json()
    assert summary["valid_rate_pct"] == pytest.approx(31.5)
    assert summary["contest_average_pct"] == pytest.approx(27.6)

    assert client.get("/v1/runs/v1/reports/unknown").status_code == 404


def test_v2_recall_report_endpoint(tmp_path):
    runs_root = tmp_path / "runs"
    store = RunStore(runs_root, "v2")
    pipeline.seed_run_from_findings(store, bundled.load_v2_findings())
    client = TestClient(build_app(runs_root))
    recall = client.get("/v1/runs/v2/reports/recall").json()
    assert recall["total"]["recall_pct"] == pytest.approx(27.3)
    assert recall["matched_issue_ids"] == [40, 203, 381]


def _artifact_hashes(run_dir: Path) -> dict[str, str]:
    out = {}
    for path in sorted(run_dir.rglob("*")):
        if path.is_file():
            out[str(path)] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


def test_gets_never_mutate_artifacts(service):
    client, runs_root, _ = service
    before = _artifact_hashes(runs_root)
    for url in ("/v1/runs", "/v1/runs/v1", "/v1/runs/v1/findings",
                "/v1/runs/v1/reports/attribution", "/v1/runs/v1/reports/fp",
                "/v1/runs/v1/reports/summary", "/v1/runs/v1/threat-model",
                "/v1/runs/demo/findings"):
        assert client.get(url).status_code == 200
    assert _artifact_hashes(runs_root) == before


def test_malformed_finding_id_is_404(service):
    client, _, _ = service
    assert client.post("/v1/findings/garbage/triage",
                       json={"verdict": "VALID"}).status_code == 404
    assert client.post("/v1/findings/F-nope/triage",
                       json={"verdict": "VALID"}).status_code == 404
