"""Per-sample analysis orchestration.

One sample flows: keyword extraction -> forensic-report prompt ->
generation -> parse -> verdict prompt -> generation -> label
verification (with a single retry) -> export record. Failures never
escape a batch; they are encoded in the result status with whatever
partial artifacts exist.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable

from .backend import BackendError, GenerationParams
from .corpus import CodeSample
from .encoding import EncoderError
from .forensics import (ForensicReport, Label, SiemRecord, Verdict,
                        parse_label, parse_report, to_siem_record)
from .keywords import KeywordCandidate, KeywordSet, RagConfig, extract_keywords
from .knowledge import KnowledgeIndex
from .prompting import TemplateSet, build_prompt1, build_prompt2

logger = logging.getLogger(__name__)

STATUS_COMPLETED = "completed"
STATUS_LABEL_UNVERIFIED = "label_unverified"
STATUS_BACKEND_FAILED = "backend_failed"
STATUSES = (STATUS_COMPLETED, STATUS_LABEL_UNVERIFIED, STATUS_BACKEND_FAILED)


@dataclass
class PipelineDeps:
    index: KnowledgeIndex
    backend: object  # anything with complete(prompt, params) -> str
    templates: TemplateSet = field(default_factory=TemplateSet.bundled)
    encoder: object | None = None  # defaults to the index's encoder
    rag: RagConfig = field(default_factory=RagConfig)
    gen: GenerationParams = field(default_factory=GenerationParams)


@dataclass
class AnalysisResult:
    sample: CodeSample
    keyword_set: KeywordSet
    prompt1_version: str
    prompt2_version: str
    report: ForensicReport | None
    verdict: Verdict | None
    siem: SiemRecord | None
    status: str
    timing: dict[str, float]
    created_at: str
    error: str | None = None

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if (self.siem is not None) != (self.status == STATUS_COMPLETED):
            raise ValueError("siem record present iff status is completed")
        if self.status == STATUS_COMPLETED and not (self.verdict and self.verdict.verified):
            raise ValueError("completed analyses carry a verified verdict")

    @property
    def sample_id(self) -> str:
        return self.sample.id

    @property
    def label(self) -> Label | None:
        return self.verdict.label if self.verdict else None


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def analyze(sample: CodeSample, deps: PipelineDeps) -> AnalysisResult:
    """Run the full pipeline on one sample.

    Never raises for backend or encoder trouble: the outcome is encoded
    in ``status`` so a batch always yields one result per sample.
    """
    timing: dict[str, float] = {}
    created_at = _now()
    keyword_set = KeywordSet()
    report: ForensicReport | None = None
    verdict: Verdict | None = None
    p1_version = deps.templates.prompt1.version
    p2_version = deps.templates.prompt2.version

    def failed(stage: str, exc: Exception) -> AnalysisResult:
        logger.warning("sample %s failed at %s: %s", sample.id, stage, exc)
        return AnalysisResult(
            sample=sample, keyword_set=keyword_set,
            prompt1_version=p1_version, prompt2_version=p2_version,
            report=report, verdict=verdict, siem=None,
            status=STATUS_BACKEND_FAILED, timing=timing,
            created_at=created_at, error=f"{stage}: {exc}")

    t0 = time.perf_counter()
    try:
        keyword_set = extract_keywords(sample, deps.index, deps.rag,
                                       encoder=deps.encoder)
    except EncoderError as exc:
        timing["keywords"] = time.perf_counter() - t0
        return failed("keywords", exc)
    timing["keywords"] = time.perf_counter() - t0

    prompt1 = build_prompt1(sample, keyword_set, deps.templates)
    t0 = time.perf_counter()
    try:
        report_text = deps.backend.complete(prompt1, deps.gen)
    except BackendError as exc:
        timing["report"] = time.perf_counter() - t0
        return failed("report", exc)
    timing["report"] = time.perf_counter() - t0
    report = parse_report(report_text)

    prompt2 = build_prompt2(report, deps.templates)
    t0 = time.perf_counter()
    try:
        verdict = parse_label(deps.backend.complete(prompt2, deps.gen))
        if not verdict.verified:
            # One re-query at the same (deterministic) settings; repeated
            # ambiguity is a prompt defect we surface, not something to
            # retry into the ground.
            verdict = parse_label(deps.backend.complete(prompt2, deps.gen))
    except BackendError as exc:
        timing["label"] = time.perf_counter() - t0
        return failed("label", exc)
    timing["label"] = time.perf_counter() - t0

    if not verdict.verified:
        return AnalysisResult(
            sample=sample, keyword_set=keyword_set,
            prompt1_version=p1_version, prompt2_version=p2_version,
            report=report, verdict=verdict, siem=None,
            status=STATUS_LABEL_UNVERIFIED, timing=timing,
            created_at=created_at,
            error=f"label unverified: {verdict.raw_response!r}")

    siem = to_siem_record(sample, report, verdict)
    return AnalysisResult(
        sample=sample, keyword_set=keyword_set,
        prompt1_version=p1_version, prompt2_version=p2_version,
        report=report, verdict=verdict, siem=siem,
        status=STATUS_COMPLETED, timing=timing, created_at=created_at)


def analyze_batch(samples: Iterable[CodeSample], deps: PipelineDeps) -> list[AnalysisResult]:
    """Analyze every sample; n samples in, exactly n results out."""
    return [analyze(sample, deps) for sample in samples]


# --- serialization (shared by the store and the HTTP API) --------------------

def result_to_dict(result: AnalysisResult) -> dict:
    sample = result.sample
    return {
        "sample": {
            "id": sample.id, "body": sample.body, "kind": sample.kind,
            "language_hint": sample.language_hint,
            "origin_dataset": sample.origin_dataset,
            "lossy_decode": sample.lossy_decode,
        },
        "keyword_set": {
            "keywords": list(result.keyword_set.keywords),
            "provenance": [
                {"term": c.term, "tfidf_score": c.tfidf_score,
                 "similarity": c.similarity,
                 "source_doc_ids": list(c.source_doc_ids)}
                for c in result.keyword_set.provenance
            ],
        },
        "prompt1_version": result.prompt1_version,
        "prompt2_version": result.prompt2_version,
        "report": None if result.report is None else {
            "conclusion": result.report.conclusion,
            "reasoning": result.report.reasoning,
            "evidence": list(result.report.evidence),
            "suspicious_explanation": result.report.suspicious_explanation,
            "parse_flags": sorted(result.report.parse_flags),
            "raw_text": result.report.raw_text,
        },
        "verdict": None if result.verdict is None else {
            "label": result.verdict.label.value if result.verdict.label else None,
            "verified": result.verdict.verified,
            "raw_response": result.verdict.raw_response,
        },
        "siem": None if result.siem is None else result.siem.to_obj(),
        "status": result.status,
        "timing": dict(result.timing),
        "created_at": result.created_at,
        "error": result.error,
    }


def result_from_dict(obj: dict) -> AnalysisResult:
    from .forensics import SiemRecord  # local to keep import surface obvious

    s = obj["sample"]
    sample = CodeSample(id=s["id"], body=s["body"], kind=s["kind"],
                        language_hint=s.get("language_hint"),
                        origin_dataset=s.get("origin_dataset"),
                        lossy_decode=bool(s.get("lossy_decode", False)))
    ks = obj["keyword_set"]
    keyword_set = KeywordSet(
        keywords=list(ks["keywords"]),
        provenance=[KeywordCandidate(term=c["term"], tfidf_score=c["tfidf_score"],
                                     similarity=c["similarity"],
                                     source_doc_ids=list(c["source_doc_ids"]))
                    for c in ks["provenance"]])
    r = obj.get("report")
    report = None if r is None else ForensicReport(
        conclusion=r["conclusion"], reasoning=r["reasoning"],
        evidence=list(r["evidence"]),
        suspicious_explanation=r["suspicious_explanation"],
        parse_flags=frozenset(r["parse_flags"]), raw_text=r["raw_text"])
    v = obj.get("verdict")
    verdict = None if v is None else Verdict(
        label=Label(v["label"]) if v["label"] else None,
        verified=v["verified"], raw_response=v["raw_response"])
    siem_obj = obj.get("siem")
    siem = None if siem_obj is None else SiemRecord.from_obj(siem_obj)
    return AnalysisResult(
        sample=sample, keyword_set=keyword_set,
        prompt1_version=obj["prompt1_version"],
        prompt2_version=obj["prompt2_version"],
        report=report, verdict=verdict, siem=siem,
        status=obj["status"], timing=dict(obj["timing"]),
        created_at=obj["created_at"], error=obj.get("error"))
