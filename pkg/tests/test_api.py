from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from maltriage.api import ServiceState, create_app
from maltriage.backend import MockBackend
from maltriage.pipeline import PipelineDeps
from maltriage.store import AnalysisStore

WINDOWS_UPDATE = {
    "id": "malware_sample_0645470.c",
    "body": "oid exploitWindowsUpdate() { ... }\n"
            "int main() { exploitWindowsUpdate(); return 0; }",
}
POLYMORPHIC = {
    "id": "malware_sample_0816286.c",
    "body": "void inject_polymorphic_dll(DWORD pid) { ... }\nint main() { ... }",
}


@pytest.fixture
def client(tmp_path, kb_index, fixtures_dir):
    store = AnalysisStore(tmp_path / "store.db")
    backend = MockBackend.from_script(fixtures_dir / "mock" / "canned_analyses.json")
    state = ServiceState(store=store,
                         deps=PipelineDeps(index=kb_index, backend=backend))
    with TestClient(create_app(state)) as c:
        yield c
    store.close()


class TestHealthAndStatic:
    def test_health(self, client):
        resp = client.get("/api/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok"}

    def test_root_serves_console_or_placeholder(self, client):
        resp = client.get("/")
        assert resp.status_code == 200
        assert "text/html" in resp.headers["content-type"]


class TestAnalyzeEndpoint:
    def test_analyze_returns_detail(self, client):
        resp = client.post("/api/analyze", json=WINDOWS_UPDATE)
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] == "completed"
        assert body["label"] == "malware"
        assert body["siem"]["final_Judgment"] == "MALWARE"
        assert body["analysis_id"] >= 1

    def test_read_your_writes(self, client):
        created = client.post("/api/analyze", json=POLYMORPHIC).json()
        fetched = client.get(f"/api/analyses/{created['analysis_id']}").json()
        assert fetched["siem"] == created["siem"]
        assert fetched["keyword_set"] == created["keyword_set"]
        listed = client.get("/api/analyses").json()
        assert [a["analysis_id"] for a in listed] == [created["analysis_id"]]

    def test_golden_record_through_api(self, client, fixtures_dir):
        created = client.post("/api/analyze", json=WINDOWS_UPDATE).json()
        detail = client.get(f"/api/analyses/{created['analysis_id']}").json()
        expected = json.loads(
            (fixtures_dir / "golden" / "siem_windows_update.json").read_text())
        assert detail["siem"] == expected

    def test_invalid_sample_rejected(self, client):
        resp = client.post("/api/analyze", json={"id": "", "body": ""})
        assert resp.status_code == 422
        assert resp.json()["code"] == "invalid_input"

    def test_backend_unavailable(self, tmp_path):
        store = AnalysisStore(tmp_path / "s.db")
        with TestClient(create_app(ServiceState(store=store, deps=None))) as c:
            resp = c.post("/api/analyze", json=WINDOWS_UPDATE)
        assert resp.status_code == 503
        assert resp.json()["code"] == "backend_unavailable"
        store.close()


class TestListingAndFilters:
    def test_filters(self, client):
        client.post("/api/analyze", json=WINDOWS_UPDATE)
        client.post("/api/analyze", json=POLYMORPHIC)
        malware = client.get("/api/analyses", params={"label": "malware"}).json()
        assert len(malware) == 1
        assert malware[0]["sample_id"] == "malware_sample_0645470.c"
        done = client.get("/api/analyses", params={"status": "completed"}).json()
        assert len(done) == 2

    def test_filter_vocabulary_is_closed(self, client):
        resp = client.get("/api/analyses", params={"label": "suspicious"})
        assert resp.status_code == 422
        assert resp.json()["code"] == "invalid_input"
        resp = client.get("/api/analyses", params={"status": "done"})
        assert resp.status_code == 422

    def test_unknown_analysis_404(self, client):
        resp = client.get("/api/analyses/12345")
        assert resp.status_code == 404
        assert resp.json()["code"] == "not_found"


class TestFeedbackEndpoint:
    def test_accept_and_reviewed_flag(self, client):
        created = client.post("/api/analyze", json=WINDOWS_UPDATE).json()
        aid = created["analysis_id"]
        resp = client.post(f"/api/analyses/{aid}/feedback",
                           json={"analyst_label": "malware", "notes": "agree"})
        assert resp.status_code == 200
        assert resp.json()["action"] == "accepted"
        listed = client.get("/api/analyses").json()
        assert listed[0]["reviewed"] is True

    def test_modify(self, client):
        created = client.post("/api/analyze", json=POLYMORPHIC).json()
        resp = client.post(f"/api/analyses/{created['analysis_id']}/feedback",
                           json={"analyst_label": "benign"})
        assert resp.json()["action"] == "modified"

    def test_label_outside_closed_set_is_422(self, client):
        created = client.post("/api/analyze", json=WINDOWS_UPDATE).json()
        resp = client.post(f"/api/analyses/{created['analysis_id']}/feedback",
                           json={"analyst_label": "maybe"})
        assert resp.status_code == 422
        assert resp.json()["code"] == "invalid_input"

    def test_feedback_on_unknown_analysis_404(self, client):
        resp = client.post("/api/analyses/777/feedback",
                           json={"analyst_label": "malware"})
        assert resp.status_code == 404


class TestFinetuneEndpoint:
    def test_export_reflects_review_state(self, client):
        a = client.post("/api/analyze", json=WINDOWS_UPDATE).json()["analysis_id"]
        b = client.post("/api/analyze", json=POLYMORPHIC).json()["analysis_id"]
        client.post("/api/analyze", json=POLYMORPHIC)  # third, unreviewed
        client.post(f"/api/analyses/{a}/feedback", json={"analyst_label": "malware"})
        client.post(f"/api/analyses/{b}/feedback", json={"analyst_label": "benign"})

        resp = client.get("/api/export/finetune")
        assert resp.status_code == 200
        lines = [json.loads(l) for l in resp.text.splitlines() if l]
        assert len(lines) == 2
        assert lines[1]["final_label"] == "benign"  # analyst's, not the model's

    def test_empty_export(self, client):
        resp = client.get("/api/export/finetune")
        assert resp.status_code == 200
        assert resp.text == ""
