"""Durable storage for analyses, samples, and analyst feedback.

A single-file SQLite database: no external service, safe to copy around
with a case. Analyses are append-only history (re-analysis adds a row,
it never overwrites), which is what post-incident audit needs. Writes
are serialized through one lock; reads can come from any thread.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import MaltriageError
from .forensics import Label, SiemRecord, export_jsonl
from .pipeline import (STATUS_COMPLETED, AnalysisResult, result_from_dict,
                       result_to_dict)

SCHEMA_VERSION = 1

ACTION_ACCEPTED = "accepted"
ACTION_MODIFIED = "modified"


class StoreError(MaltriageError):
    pass


class NotFoundError(StoreError):
    pass


class FeedbackConflictError(StoreError):
    """Feedback is only meaningful on a completed analysis."""


@dataclass
class FeedbackRecord:
    analysis_id: int
    analyst_label: Label
    analyst_notes: str
    action: str
    created_at: str
    feedback_id: int | None = None


@dataclass
class AnalysisSummary:
    analysis_id: int
    sample_id: str
    status: str
    label: str | None
    created_at: str
    reviewed: bool


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class AnalysisStore:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._init_schema()

    def _init_schema(self) -> None:
        with self._lock, self._conn:
            self._conn.executescript("""
                CREATE TABLE IF NOT EXISTS meta (
                    key TEXT PRIMARY KEY,
                    value TEXT NOT NULL
                );
                CREATE TABLE IF NOT EXISTS analyses (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    sample_id TEXT NOT NULL,
                    created_at TEXT NOT NULL,
                    status TEXT NOT NULL,
                    label TEXT,
                    verified INTEGER NOT NULL DEFAULT 0,
                    result_json TEXT NOT NULL
                );
                CREATE TABLE IF NOT EXISTS samples (
                    analysis_id INTEGER NOT NULL REFERENCES analyses(id),
                    sample_id TEXT NOT NULL,
                    kind TEXT NOT NULL,
                    language_hint TEXT,
                    origin_dataset TEXT,
                    lossy_decode INTEGER NOT NULL DEFAULT 0,
                    body TEXT NOT NULL
                );
                CREATE TABLE IF NOT EXISTS feedback (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    analysis_id INTEGER NOT NULL REFERENCES analyses(id),
                    analyst_label TEXT NOT NULL,
                    analyst_notes TEXT NOT NULL DEFAULT '',
                    action TEXT NOT NULL,
                    created_at TEXT NOT NULL
                );
                CREATE INDEX IF NOT EXISTS idx_analyses_status ON analyses(status);
                CREATE INDEX IF NOT EXISTS idx_feedback_analysis ON feedback(analysis_id);
            """)
            row = self._conn.execute(
                "SELECT value FROM meta WHERE key='schema_version'").fetchone()
            if row is None:
                self._conn.execute(
                    "INSERT INTO meta (key, value) VALUES ('schema_version', ?)",
                    (str(SCHEMA_VERSION),))
            elif int(row["value"]) != SCHEMA_VERSION:
                raise StoreError(f"store schema version {row['value']} is not "
                                 f"supported (expected {SCHEMA_VERSION})")

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # -- analyses -------------------------------------------------------------

    def save(self, result: AnalysisResult) -> int:
        """Persist one analysis; always a new row, never an overwrite."""
        payload = json.dumps(result_to_dict(result), ensure_ascii=False)
        label = result.label.value if result.label else None
        verified = 1 if (result.verdict and result.verdict.verified) else 0
        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO analyses (sample_id, created_at, status, label, "
                "verified, result_json) VALUES (?, ?, ?, ?, ?, ?)",
                (result.sample_id, result.created_at, result.status, label,
                 verified, payload))
            analysis_id = cur.lastrowid
            s = result.sample
            self._conn.execute(
                "INSERT INTO samples (analysis_id, sample_id, kind, "
                "language_hint, origin_dataset, lossy_decode, body) "
                "VALUES (?, ?, ?, ?, ?, ?, ?)",
                (analysis_id, s.id, s.kind, s.language_hint, s.origin_dataset,
                 1 if s.lossy_decode else 0, s.body))
        return int(analysis_id)

    def fetch(self, analysis_id: int) -> AnalysisResult:
        with self._lock:
            row = self._conn.execute(
                "SELECT result_json FROM analyses WHERE id=?",
                (analysis_id,)).fetchone()
        if row is None:
            raise NotFoundError(f"no analysis with id {analysis_id}")
        return result_from_dict(json.loads(row["result_json"]))

    def list_analyses(self, status: str | None = None,
                      label: str | None = None) -> list[AnalysisSummary]:
        query = ("SELECT a.id, a.sample_id, a.status, a.label, a.created_at, "
                 "EXISTS(SELECT 1 FROM feedback f WHERE f.analysis_id=a.id) "
                 "AS reviewed FROM analyses a")
        clauses, params = [], []
        if status is not None:
            clauses.append("a.status=?")
            params.append(status)
        if label is not None:
            clauses.append("a.label=?")
            params.append(label)
        if clauses:
            query += " WHERE " + " AND ".join(clauses)
        query += " ORDER BY a.id"
        with self._lock:
            rows = self._conn.execute(query, params).fetchall()
        return [AnalysisSummary(analysis_id=r["id"], sample_id=r["sample_id"],
                                status=r["status"], label=r["label"],
                                created_at=r["created_at"],
                                reviewed=bool(r["reviewed"]))
                for r in rows]

    # -- SIEM export ----------------------------------------------------------

    def siem_records(self) -> list[SiemRecord]:
        """Export records of completed analyses, in analysis order."""
        with self._lock:
            rows = self._conn.execute(
                "SELECT result_json FROM analyses WHERE status=? ORDER BY id",
                (STATUS_COMPLETED,)).fetchall()
        records = []
        for row in rows:
            result = result_from_dict(json.loads(row["result_json"]))
            if result.siem is not None:
                records.append(result.siem)
        return records

    def export_siem(self, path: str | Path) -> int:
        return export_jsonl(self.siem_records(), path)

    # -- feedback -------------------------------------------------------------

    def submit_feedback(self, analysis_id: int, analyst_label: Label,
                        notes: str = "") -> FeedbackRecord:
        """Record an analyst decision.

        The action is derived, not chosen: agreeing with the stored
        verdict is an acceptance, anything else is a modification.
        History is append-only; the latest record per analysis wins for
        export purposes.
        """
        with self._lock:
            row = self._conn.execute(
                "SELECT status, label FROM analyses WHERE id=?",
                (analysis_id,)).fetchone()
            if row is None:
                raise NotFoundError(f"no analysis with id {analysis_id}")
            if row["status"] != STATUS_COMPLETED:
                raise FeedbackConflictError(
                    f"analysis {analysis_id} has status {row['status']}; "
                    "only completed analyses take feedback")
            action = (ACTION_ACCEPTED if row["label"] == analyst_label.value
                      else ACTION_MODIFIED)
            created_at = _now()
            with self._conn:
                cur = self._conn.execute(
                    "INSERT INTO feedback (analysis_id, analyst_label, "
                    "analyst_notes, action, created_at) VALUES (?, ?, ?, ?, ?)",
                    (analysis_id, analyst_label.value, notes, action, created_at))
            return FeedbackRecord(analysis_id=analysis_id,
                                  analyst_label=analyst_label,
                                  analyst_notes=notes, action=action,
                                  created_at=created_at,
                                  feedback_id=int(cur.lastrowid))

    def feedback_for(self, analysis_id: int) -> list[FeedbackRecord]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM feedback WHERE analysis_id=? ORDER BY id",
                (analysis_id,)).fetchall()
        return [FeedbackRecord(analysis_id=r["analysis_id"],
                               analyst_label=Label(r["analyst_label"]),
                               analyst_notes=r["analyst_notes"],
                               action=r["action"], created_at=r["created_at"],
                               feedback_id=r["id"])
                for r in rows]

    # -- fine-tune export -------------------------------------------------------

    def finetune_records(self) -> list[dict]:
        """Training-data hand-off: one record per reviewed analysis,
        carrying the analyst's label (latest feedback wins). Analyses
        without feedback are skipped; training itself happens elsewhere."""
        with self._lock:
            rows = self._conn.execute("""
                SELECT a.result_json, f.analyst_label
                FROM analyses a
                JOIN feedback f ON f.analysis_id = a.id
                WHERE f.id = (SELECT MAX(id) FROM feedback WHERE analysis_id = a.id)
                ORDER BY a.id
            """).fetchall()
        records = []
        for row in rows:
            result = result_from_dict(json.loads(row["result_json"]))
            records.append({
                "source_code": result.sample.body,
                "report_text": result.report.raw_text if result.report else "",
                "final_label": row["analyst_label"],
            })
        return records

    def export_finetune(self, path: str | Path) -> int:
        records = self.finetune_records()
        path = Path(path)
        try:
            with path.open("w", encoding="utf-8", newline="\n") as fh:
                for record in records:
                    fh.write(json.dumps(record, ensure_ascii=False))
                    fh.write("\n")
        except OSError as exc:
            raise StoreError(f"cannot write {path}: {exc}") from exc
        return len(records)
