from __future__ import annotations

import json

import pytest

from maltriage.backend import MockBackend
from maltriage.corpus import CodeSample
from maltriage.forensics import Label
from maltriage.pipeline import (STATUS_BACKEND_FAILED, STATUS_COMPLETED,
                                STATUS_LABEL_UNVERIFIED, PipelineDeps,
                                analyze, analyze_batch, result_from_dict,
                                result_to_dict)
from maltriage.store import (AnalysisStore, FeedbackConflictError,
                             NotFoundError)

WINDOWS_UPDATE_SAMPLE = CodeSample(
    id="malware_sample_0645470.c",
    body="oid exploitWindowsUpdate() { ... }\n"
         "int main() { exploitWindowsUpdate(); return 0; }")
POLYMORPHIC_SAMPLE = CodeSample(
    id="malware_sample_0816286.c",
    body="void inject_polymorphic_dll(DWORD pid) { ... }\nint main() { ... }")


@pytest.fixture
def canned_deps(kb_index, fixtures_dir):
    backend = MockBackend.from_script(fixtures_dir / "mock" / "canned_analyses.json")
    return PipelineDeps(index=kb_index, backend=backend)


@pytest.fixture
def store(tmp_path):
    s = AnalysisStore(tmp_path / "store.db")
    yield s
    s.close()


class TestAnalyze:
    def test_known_malware_sample_completes(self, canned_deps):
        result = analyze(WINDOWS_UPDATE_SAMPLE, canned_deps)
        assert result.status == STATUS_COMPLETED
        assert result.verdict.verified and result.label is Label.MALWARE
        assert result.siem.final_Judgment == "MALWARE"
        assert result.siem.ID == "malware_sample_0645470.c"
        assert result.prompt1_version == "1" and result.prompt2_version == "1"
        assert set(result.timing) == {"keywords", "report", "label"}

    def test_partially_malicious_sample_completes(self, canned_deps):
        result = analyze(POLYMORPHIC_SAMPLE, canned_deps)
        assert result.status == STATUS_COMPLETED
        assert result.siem.final_Judgment == "PARTIALLY MALICIOUS"

    def test_unverifiable_label_after_retry(self, kb_index, tmp_path):
        script = tmp_path / "s.json"
        script.write_text(json.dumps([
            {"match": {"contains": "Respond with exactly one of"}, "response": "maybe"},
            {"response": "Conclusion: x\nReasoning: y\nEvidence:\n- z\n"
                         "Explanation of Suspicious Elements: w"},
        ]))
        deps = PipelineDeps(index=kb_index, backend=MockBackend.from_script(script))
        result = analyze(CodeSample(id="s", body="int main(){}"), deps)
        assert result.status == STATUS_LABEL_UNVERIFIED
        assert result.siem is None
        assert result.report is not None  # partial artifacts retained
        assert not result.verdict.verified

    def test_backend_failure_keeps_partial_artifacts(self, kb_index, tmp_path):
        script = tmp_path / "s.json"
        script.write_text(json.dumps([{"fail": "socket reset"}]))
        deps = PipelineDeps(index=kb_index, backend=MockBackend.from_script(script))
        result = analyze(CodeSample(id="s", body="RegSetValueExA(k, v)"), deps)
        assert result.status == STATUS_BACKEND_FAILED
        assert result.siem is None and result.report is None
        assert result.keyword_set.keywords  # stage before the failure survived
        assert "socket reset" in result.error

    def test_failure_at_label_stage_keeps_report(self, kb_index, tmp_path):
        script = tmp_path / "s.json"
        script.write_text(json.dumps([
            {"match": {"contains": "Respond with exactly one of"},
             "fail": "label stage down"},
            {"response": "Conclusion: c\nReasoning: r\nEvidence:\n- e\n"
                         "Explanation of Suspicious Elements: s"},
        ]))
        deps = PipelineDeps(index=kb_index, backend=MockBackend.from_script(script))
        result = analyze(CodeSample(id="s", body="int main(){}"), deps)
        assert result.status == STATUS_BACKEND_FAILED
        assert result.report is not None and result.report.conclusion == "c"

    def test_deterministic_end_to_end(self, canned_deps):
        a = analyze(WINDOWS_UPDATE_SAMPLE, canned_deps)
        b = analyze(WINDOWS_UPDATE_SAMPLE, canned_deps)
        assert a.siem == b.siem
        assert a.keyword_set == b.keyword_set
        assert a.report == b.report

    def test_batch_yields_one_result_per_sample(self, kb_index, tmp_path):
        script = tmp_path / "s.json"
        script.write_text(json.dumps([
            {"match": {"contains": "POISON"}, "fail": "down"},
            {"match": {"contains": "Respond with exactly one of"}, "response": "BENIGN"},
            {"response": "Conclusion: c\nReasoning: r\nEvidence:\n- e\n"
                         "Explanation of Suspicious Elements: s"},
        ]))
        deps = PipelineDeps(index=kb_index, backend=MockBackend.from_script(script))
        samples = [CodeSample(id=f"s{i}", body="POISON" if i % 3 == 0 else "int x;")
                   for i in range(9)]
        results = analyze_batch(samples, deps)
        assert len(results) == 9
        assert [r.sample_id for r in results] == [s.id for s in samples]
        assert sum(r.status == STATUS_BACKEND_FAILED for r in results) == 3


class TestResultSerialization:
    def test_roundtrip_completed(self, canned_deps):
        result = analyze(WINDOWS_UPDATE_SAMPLE, canned_deps)
        assert result_from_dict(result_to_dict(result)) == result

    def test_roundtrip_failed(self, kb_index, tmp_path):
        script = tmp_path / "s.json"
        script.write_text(json.dumps([{"fail": "down"}]))
        deps = PipelineDeps(index=kb_index, backend=MockBackend.from_script(script))
        result = analyze(CodeSample(id="s", body="x y"), deps)
        assert result_from_dict(result_to_dict(result)) == result

    def test_json_safe(self, canned_deps):
        result = analyze(POLYMORPHIC_SAMPLE, canned_deps)
        payload = json.dumps(result_to_dict(result))
        assert result_from_dict(json.loads(payload)) == result


class TestStore:
    def test_save_fetch_roundtrip(self, canned_deps, store):
        result = analyze(WINDOWS_UPDATE_SAMPLE, canned_deps)
        analysis_id = store.save(result)
        assert store.fetch(analysis_id) == result

    def test_reanalysis_is_history_not_overwrite(self, canned_deps, store):
        result = analyze(WINDOWS_UPDATE_SAMPLE, canned_deps)
        first, second = store.save(result), store.save(result)
        assert first != second
        assert len(store.list_analyses()) == 2

    def test_fetch_unknown_id(self, store):
        with pytest.raises(NotFoundError):
            store.fetch(999)

    def test_filtering_by_status_and_label(self, canned_deps, kb_index,
                                           tmp_path, store):
        store.save(analyze(WINDOWS_UPDATE_SAMPLE, canned_deps))
        store.save(analyze(POLYMORPHIC_SAMPLE, canned_deps))
        script = tmp_path / "fail.json"
        script.write_text(json.dumps([{"fail": "down"}]))
        failing = PipelineDeps(index=kb_index,
                               backend=MockBackend.from_script(script))
        store.save(analyze(CodeSample(id="s3", body="x y"), failing))

        assert len(store.list_analyses()) == 3
        malware = store.list_analyses(label="malware")
        assert [s.sample_id for s in malware] == ["malware_sample_0645470.c"]
        failed = store.list_analyses(status=STATUS_BACKEND_FAILED)
        assert [s.sample_id for s in failed] == ["s3"]
        completed = store.list_analyses(status=STATUS_COMPLETED)
        assert len(completed) == 2

    def test_siem_export_covers_completed_only(self, canned_deps, kb_index,
                                               tmp_path, store):
        store.save(analyze(WINDOWS_UPDATE_SAMPLE, canned_deps))
        script = tmp_path / "fail.json"
        script.write_text(json.dumps([{"fail": "down"}]))
        failing = PipelineDeps(index=kb_index,
                               backend=MockBackend.from_script(script))
        store.save(analyze(CodeSample(id="s2", body="x y"), failing))
        out = tmp_path / "siem.jsonl"
        assert store.export_siem(out) == 1
        assert json.loads(out.read_text())["ID"] == "malware_sample_0645470.c"


class TestFeedback:
    def test_accept_when_labels_agree(self, canned_deps, store):
        analysis_id = store.save(analyze(WINDOWS_UPDATE_SAMPLE, canned_deps))
        record = store.submit_feedback(analysis_id, Label.MALWARE, notes="agreed")
        assert record.action == "accepted"

    def test_modify_when_labels_differ(self, canned_deps, store):
        analysis_id = store.save(analyze(POLYMORPHIC_SAMPLE, canned_deps))
        record = store.submit_feedback(analysis_id, Label.BENIGN)
        assert record.action == "modified"

    def test_unknown_analysis_rejected(self, store):
        with pytest.raises(NotFoundError):
            store.submit_feedback(42, Label.MALWARE)

    def test_feedback_on_non_completed_rejected(self, kb_index, tmp_path, store):
        script = tmp_path / "fail.json"
        script.write_text(json.dumps([{"fail": "down"}]))
        deps = PipelineDeps(index=kb_index, backend=MockBackend.from_script(script))
        analysis_id = store.save(analyze(CodeSample(id="s", body="x y"), deps))
        with pytest.raises(FeedbackConflictError):
            store.submit_feedback(analysis_id, Label.BENIGN)

    def test_history_kept_latest_wins(self, canned_deps, store):
        analysis_id = store.save(analyze(WINDOWS_UPDATE_SAMPLE, canned_deps))
        store.submit_feedback(analysis_id, Label.MALWARE)
        store.submit_feedback(analysis_id, Label.BENIGN, notes="second look")
        history = store.feedback_for(analysis_id)
        assert [f.analyst_label for f in history] == [Label.MALWARE, Label.BENIGN]
        records = store.finetune_records()
        assert len(records) == 1 and records[0]["final_label"] == "benign"


class TestFinetuneExport:
    def test_no_feedback_no_lines(self, canned_deps, store, tmp_path):
        store.save(analyze(WINDOWS_UPDATE_SAMPLE, canned_deps))
        out = tmp_path / "ft.jsonl"
        assert store.export_finetune(out) == 0
        assert out.read_text() == ""

    def test_modified_line_carries_analyst_label(self, canned_deps, store, tmp_path):
        analysis_id = store.save(analyze(WINDOWS_UPDATE_SAMPLE, canned_deps))
        store.submit_feedback(analysis_id, Label.PARTIALLY_MALICIOUS)
        out = tmp_path / "ft.jsonl"
        assert store.export_finetune(out) == 1
        line = json.loads(out.read_text())
        assert line["final_label"] == "partially_malicious"  # not the model's
        assert line["source_code"] == WINDOWS_UPDATE_SAMPLE.body
        assert "Classified as MALWARE." in line["report_text"]

    def test_one_line_per_reviewed_analysis(self, canned_deps, store, tmp_path):
        a = store.save(analyze(WINDOWS_UPDATE_SAMPLE, canned_deps))
        b = store.save(analyze(POLYMORPHIC_SAMPLE, canned_deps))
        store.save(analyze(POLYMORPHIC_SAMPLE, canned_deps))  # unreviewed
        store.submit_feedback(a, Label.MALWARE)
        store.submit_feedback(b, Label.BENIGN)
        out = tmp_path / "ft.jsonl"
        assert store.export_finetune(out) == 2
        labels = [json.loads(l)["final_label"]
                  for l in out.read_text().splitlines()]
        assert labels == ["malware", "benign"]
