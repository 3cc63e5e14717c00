"""HTTP service for programmatic clients and the review console.

All analysis state lives in the store; reads always reflect prior
mutations on this node. Labels cross the API only as the closed enum
vocabulary. No authentication: the service is meant to bind to
localhost for a single analyst, and says so in the README.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import HTMLResponse, JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .backend import BackendConfigError, HttpBackend, MockBackend, RemoteBackendConfig
from .config import AppConfig
from .corpus import CodeSample
from .encoding import HashingEncoder
from .forensics import Label
from .knowledge import build_index, ingest_snapshot
from .pipeline import STATUSES, PipelineDeps, analyze, result_to_dict
from .prompting import TemplateSet
from .store import AnalysisStore, FeedbackConflictError, NotFoundError

LABEL_VALUES = tuple(label.value for label in Label)


class SampleIn(BaseModel):
    id: str = Field(min_length=1)
    body: str = Field(min_length=1)
    kind: Literal["source", "assembly"] = "source"
    language_hint: str | None = None
    origin_dataset: str | None = None


class FeedbackIn(BaseModel):
    analyst_label: Literal["malware", "benign", "partially_malicious"]
    notes: str = ""


class FeedbackOut(BaseModel):
    feedback_id: int
    analysis_id: int
    analyst_label: str
    analyst_notes: str
    action: str
    created_at: str


class AnalysisSummaryOut(BaseModel):
    analysis_id: int
    sample_id: str
    status: str
    label: str | None
    created_at: str
    reviewed: bool


class ApiError(BaseModel):
    code: Literal["not_found", "invalid_input", "backend_unavailable", "conflict"]
    message: str


def _error(status_code: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status_code,
                        content=ApiError(code=code, message=message).model_dump())


class ServiceState:
    """Everything a request handler needs: the store plus the immutable
    pipeline dependencies."""

    def __init__(self, store: AnalysisStore, deps: PipelineDeps | None):
        self.store = store
        self.deps = deps  # None when no generation backend is configured


def bundled_static_dir() -> Path | None:
    """The review-console bundle shipped inside the package, if present."""
    candidate = Path(__file__).parent / "static"
    return candidate if (candidate / "index.html").is_file() else None


def build_state(config: AppConfig) -> ServiceState:
    """Wire up store, knowledge index, templates, and backend from config."""
    config.store_path.parent.mkdir(parents=True, exist_ok=True)
    store = AnalysisStore(config.store_path)

    templates = (TemplateSet.from_dir(config.template_dir)
                 if config.template_dir else TemplateSet.bundled())

    if config.mock_script:
        backend = MockBackend.from_script(config.mock_script)
    elif config.backend.url:
        backend = HttpBackend(RemoteBackendConfig(
            url=config.backend.url, model=config.backend.model,
            auth_token=config.backend.auth_token,
            max_in_flight=config.backend.max_in_flight))
    else:
        backend = None

    deps = None
    if backend is not None:
        if not config.kb_path.exists():
            raise BackendConfigError(
                f"knowledge snapshot not found at {config.kb_path}; "
                "run 'maltriage ingest-kb' first")
        index = build_index(ingest_snapshot(config.kb_path), HashingEncoder())
        deps = PipelineDeps(index=index, backend=backend, templates=templates)
    return ServiceState(store=store, deps=deps)


def _detail(state: ServiceState, analysis_id: int) -> dict:
    result = state.store.fetch(analysis_id)
    feedback = state.store.feedback_for(analysis_id)
    body = result_to_dict(result)
    body["analysis_id"] = analysis_id
    body["sample_id"] = result.sample_id
    body["label"] = result.label.value if result.label else None
    body["reviewed"] = bool(feedback)
    body["feedback"] = [
        {"feedback_id": f.feedback_id, "analysis_id": f.analysis_id,
         "analyst_label": f.analyst_label.value, "analyst_notes": f.analyst_notes,
         "action": f.action, "created_at": f.created_at}
        for f in feedback
    ]
    return body


def create_app(state: ServiceState, static_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="maltriage", docs_url="/api/docs",
                  openapi_url="/api/openapi.json")

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return _error(422, "invalid_input", str(exc.errors()[:3]))

    @app.exception_handler(NotFoundError)
    async def not_found_handler(request: Request, exc: NotFoundError):
        return _error(404, "not_found", str(exc))

    @app.exception_handler(FeedbackConflictError)
    async def conflict_handler(request: Request, exc: FeedbackConflictError):
        return _error(409, "conflict", str(exc))

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/api/analyze")
    def analyze_sample(sample_in: SampleIn):
        if state.deps is None:
            return _error(503, "backend_unavailable",
                          "no generation backend configured")
        sample = CodeSample(id=sample_in.id, body=sample_in.body,
                            kind=sample_in.kind,
                            language_hint=sample_in.language_hint,
                            origin_dataset=sample_in.origin_dataset)
        result = analyze(sample, state.deps)
        analysis_id = state.store.save(result)
        return _detail(state, analysis_id)

    @app.get("/api/analyses")
    def list_analyses(status: str | None = None, label: str | None = None):
        if status is not None and status not in STATUSES:
            return _error(422, "invalid_input",
                          f"status must be one of {STATUSES}")
        if label is not None and label not in LABEL_VALUES:
            return _error(422, "invalid_input",
                          f"label must be one of {LABEL_VALUES}")
        summaries = state.store.list_analyses(status=status, label=label)
        return [AnalysisSummaryOut(
            analysis_id=s.analysis_id, sample_id=s.sample_id, status=s.status,
            label=s.label, created_at=s.created_at, reviewed=s.reviewed)
            for s in summaries]

    @app.get("/api/analyses/{analysis_id}")
    def get_analysis(analysis_id: int):
        return _detail(state, analysis_id)

    @app.post("/api/analyses/{analysis_id}/feedback")
    def post_feedback(analysis_id: int, feedback: FeedbackIn) -> FeedbackOut:
        record = state.store.submit_feedback(
            analysis_id, Label(feedback.analyst_label), notes=feedback.notes)
        return FeedbackOut(
            feedback_id=record.feedback_id, analysis_id=record.analysis_id,
            analyst_label=record.analyst_label.value,
            analyst_notes=record.analyst_notes, action=record.action,
            created_at=record.created_at)

    @app.get("/api/export/finetune")
    def export_finetune():
        lines = [json.dumps(rec, ensure_ascii=False)
                 for rec in state.store.finetune_records()]
        body = "\n".join(lines) + ("\n" if lines else "")
        return PlainTextResponse(body, media_type="application/x-ndjson")

    static_dir = static_dir or bundled_static_dir()
    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")
    else:
        @app.get("/", response_class=HTMLResponse)
        def index() -> str:
            return ("<html><body><h1>maltriage service</h1>"
                    "<p>No review console bundle is installed. "
                    "The API lives under <code>/api</code>.</p></body></html>")

    return app
