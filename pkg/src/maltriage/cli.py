"""Command-line entry points.

Thin wrappers over the library: each subcommand resolves configuration
(flags > environment > config file), calls into the core modules, and
maps failures to exit codes. Exit 0 on success, 1 on operational
failure, 2 on usage errors.
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

import click

from . import MaltriageError
from .backend import HttpBackend, MockBackend, RemoteBackendConfig, ScriptedScorer, UniformScorer
from .config import AppConfig, load_config
from .corpus import load_manifest, load_sample_file, load_samples, verify_manifest
from .encoding import HashingEncoder
from .keywords import RagConfig, extract_keywords
from .knowledge import build_index, ingest_snapshot
from .pipeline import PipelineDeps, analyze_batch
from .ppl import evaluate_corpus, relative_table, render_table, write_results_csv, write_table_csv
from .prompting import TemplateSet
from .store import AnalysisStore


class OperationalError(click.ClickException):
    exit_code = 1


def _fail(message: str) -> "OperationalError":
    return OperationalError(message)


@click.group()
@click.option("--config", "config_path", type=click.Path(path_type=Path),
              default=None, help="JSON config file (or MALTRIAGE_CONFIG).")
@click.pass_context
def main(ctx: click.Context, config_path: Path | None) -> None:
    """Retrieval-augmented malware triage pipeline."""
    try:
        ctx.obj = load_config(config_path)
    except MaltriageError as exc:
        raise _fail(str(exc))


def _load_index(cfg: AppConfig, kb: Path | None):
    kb_path = kb or cfg.kb_path
    if not Path(kb_path).exists():
        raise _fail(f"knowledge snapshot not found: {kb_path} "
                    "(run 'maltriage ingest-kb <snapshot>' or pass --kb)")
    try:
        return build_index(ingest_snapshot(kb_path), HashingEncoder())
    except MaltriageError as exc:
        raise _fail(str(exc))


def _load_templates(cfg: AppConfig, template_dir: Path | None) -> TemplateSet:
    try:
        directory = template_dir or cfg.template_dir
        return TemplateSet.from_dir(directory) if directory else TemplateSet.bundled()
    except MaltriageError as exc:
        raise _fail(str(exc))


def _build_backend(cfg: AppConfig, mock_script: Path | None, backend_url: str | None):
    if mock_script or cfg.mock_script:
        try:
            return MockBackend.from_script(mock_script or cfg.mock_script)
        except MaltriageError as exc:
            raise _fail(str(exc))
    url = backend_url or cfg.backend.url
    if url:
        return HttpBackend(RemoteBackendConfig(
            url=url, model=cfg.backend.model, auth_token=cfg.backend.auth_token,
            max_in_flight=cfg.backend.max_in_flight))
    raise _fail("no generation backend: pass --mock-script or configure a "
                "backend URL (MALTRIAGE_BACKEND_URL)")


@main.command("ingest-kb")
@click.argument("snapshot", type=click.Path(exists=True, path_type=Path))
@click.pass_obj
def ingest_kb(cfg: AppConfig, snapshot: Path) -> None:
    """Validate a knowledge snapshot and install it as the default."""
    try:
        docs = ingest_snapshot(snapshot)
    except MaltriageError as exc:
        raise _fail(str(exc))
    cfg.kb_path.parent.mkdir(parents=True, exist_ok=True)
    if snapshot.resolve() != cfg.kb_path.resolve():
        shutil.copyfile(snapshot, cfg.kb_path)
    click.echo(f"ingested {len(docs)} documents -> {cfg.kb_path}")


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--kb", type=click.Path(path_type=Path), default=None)
@click.option("--retrieve-n", default=5, show_default=True)
@click.option("--limit", default=10, show_default=True)
@click.pass_obj
def keywords(cfg: AppConfig, file: Path, kb: Path | None,
             retrieve_n: int, limit: int) -> None:
    """Extract behavior keywords for one sample (debugging aid)."""
    index = _load_index(cfg, kb)
    try:
        sample = load_sample_file(file)
    except MaltriageError as exc:
        raise _fail(str(exc))
    try:
        rag = RagConfig(retrieve_n=retrieve_n, keyword_limit=limit,
                        candidate_pool=max(50, limit))
    except ValueError as exc:
        raise _fail(str(exc))
    ks = extract_keywords(sample, index, rag)
    click.echo(json.dumps({
        "sample_id": sample.id,
        "keywords": ks.keywords,
        "provenance": [
            {"term": c.term, "similarity": c.similarity,
             "tfidf_score": c.tfidf_score, "source_doc_ids": c.source_doc_ids}
            for c in ks.provenance
        ],
    }, indent=2))


@main.command()
@click.argument("path", type=click.Path(exists=True, path_type=Path))
@click.option("--mock-script", type=click.Path(exists=True, path_type=Path),
              default=None, help="Scripted backend for offline runs.")
@click.option("--backend-url", default=None)
@click.option("--kb", type=click.Path(path_type=Path), default=None)
@click.option("--store", "store_path", type=click.Path(path_type=Path), default=None)
@click.option("--template-dir", type=click.Path(path_type=Path), default=None)
@click.option("--kind", type=click.Choice(["source", "assembly"]), default=None,
              help="Force sample kind instead of inferring from extension.")
@click.pass_obj
def analyze(cfg: AppConfig, path: Path, mock_script: Path | None,
            backend_url: str | None, kb: Path | None, store_path: Path | None,
            template_dir: Path | None, kind: str | None) -> None:
    """Analyze one file or every file in a directory."""
    if path.is_dir():
        loaded = load_samples(path, kind=kind)
        samples = loaded.samples
        for skipped in loaded.skipped:
            click.echo(f"skipped: {skipped}", err=True)
    else:
        try:
            samples = [load_sample_file(path, kind=kind)]
        except MaltriageError as exc:
            raise _fail(str(exc))
    if not samples:
        raise _fail(f"no samples to analyze under {path}")

    deps = PipelineDeps(
        index=_load_index(cfg, kb),
        backend=_build_backend(cfg, mock_script, backend_url),
        templates=_load_templates(cfg, template_dir),
    )
    results = analyze_batch(samples, deps)

    target = store_path or cfg.store_path
    Path(target).parent.mkdir(parents=True, exist_ok=True)
    store = AnalysisStore(target)
    try:
        counts: dict[str, int] = {}
        for result in results:
            analysis_id = store.save(result)
            counts[result.status] = counts.get(result.status, 0) + 1
            label = result.label.value if result.label else "-"
            click.echo(f"[{analysis_id}] {result.sample_id}: {result.status} ({label})")
        summary = ", ".join(f"{v} {k}" for k, v in sorted(counts.items()))
        click.echo(f"analyzed {len(results)} samples: {summary}")
    finally:
        store.close()


@main.command("export-siem")
@click.argument("out", type=click.Path(path_type=Path))
@click.option("--store", "store_path", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def export_siem(cfg: AppConfig, out: Path, store_path: Path | None) -> None:
    """Write completed analyses as JSON Lines for log ingestion."""
    store = _open_store(cfg, store_path)
    try:
        count = store.export_siem(out)
    except MaltriageError as exc:
        raise _fail(str(exc))
    finally:
        store.close()
    click.echo(f"wrote {count} records -> {out}")


@main.command("export-finetune")
@click.argument("out", type=click.Path(path_type=Path))
@click.option("--store", "store_path", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def export_finetune(cfg: AppConfig, out: Path, store_path: Path | None) -> None:
    """Write the reviewed (sample, report, label) training hand-off."""
    store = _open_store(cfg, store_path)
    try:
        count = store.export_finetune(out)
    except MaltriageError as exc:
        raise _fail(str(exc))
    finally:
        store.close()
    click.echo(f"wrote {count} records -> {out}")


def _open_store(cfg: AppConfig, store_path: Path | None) -> AnalysisStore:
    target = Path(store_path or cfg.store_path)
    if not target.exists():
        raise _fail(f"store not found: {target}")
    return AnalysisStore(target)


@main.command("verify-manifest")
@click.argument("manifest", type=click.Path(exists=True, path_type=Path))
def verify_manifest_cmd(manifest: Path) -> None:
    """Check a dataset manifest's declared totals against its rows."""
    try:
        report = verify_manifest(load_manifest(manifest))
    except MaltriageError as exc:
        raise _fail(str(exc))
    for check in report.columns:
        flag = "ok" if check.match else "MISMATCH"
        click.echo(f"{check.column}: computed {check.computed}, "
                   f"declared {check.declared} [{flag}]")
    if not report.all_match:
        raise _fail("manifest totals do not match computed sums")
    click.echo("all totals match")


def _build_scorer(scorer_config: Path):
    try:
        doc = json.loads(scorer_config.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise _fail(f"bad scorer config {scorer_config}: {exc}")
    kind = doc.get("type")
    try:
        if kind == "uniform":
            return UniformScorer(int(doc["vocab_size"]))
        if kind == "scripted":
            return ScriptedScorer([float(p) for p in doc["probs"]])
        if kind == "remote":
            from .backend import RemoteScorer
            return RemoteScorer(doc["url"], timeout=float(doc.get("timeout", 60.0)),
                                tokenizer_name=doc.get("tokenizer", "provider"))
    except (KeyError, ValueError, MaltriageError) as exc:
        raise _fail(f"bad scorer config: {exc}")
    raise _fail(f"unknown scorer type {kind!r} (uniform, scripted, remote)")


@main.command("eval-ppl")
@click.option("--corpus", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--scorer", "scorer_config", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--kind", type=click.Choice(["source", "assembly"]), default=None)
def eval_ppl(corpus: Path, scorer_config: Path, out: Path, kind: str | None) -> None:
    """Score a corpus and write per-sample perplexities as CSV."""
    scorer = _build_scorer(scorer_config)
    loaded = load_samples(corpus, kind=kind)
    try:
        evaluation = evaluate_corpus(loaded.samples, scorer)
    except MaltriageError as exc:
        raise _fail(str(exc))
    write_results_csv(evaluation, out)
    click.echo(f"scored {len(evaluation.results)} samples "
               f"({len(evaluation.skipped)} skipped) with {evaluation.scorer_id}")
    click.echo(f"macro-mean perplexity:     {evaluation.macro_mean:.6g}")
    click.echo(f"token-weighted perplexity: {evaluation.token_weighted:.6g}")
    click.echo(f"per-sample results -> {out}")


@main.command("ppl-table")
@click.argument("means_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Also write the table as CSV.")
def ppl_table(means_file: Path, out: Path | None) -> None:
    """Render a relative-perplexity comparison from per-model means.

    MEANS_FILE maps data kind to {model: mean perplexity}.
    """
    try:
        means = json.loads(means_file.read_text("utf-8"))
        table = relative_table(means)
    except (json.JSONDecodeError, OSError, MaltriageError) as exc:
        raise _fail(str(exc))
    click.echo(render_table(table))
    if out:
        write_table_csv(table, out)
        click.echo(f"table CSV -> {out}")


@main.command()
@click.option("--port", default=None, type=int)
@click.option("--host", default=None)
@click.option("--store", "store_path", type=click.Path(path_type=Path), default=None)
@click.option("--kb", type=click.Path(path_type=Path), default=None)
@click.option("--mock-script", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--backend-url", default=None)
@click.option("--static-dir", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def serve(cfg: AppConfig, port: int | None, host: str | None,
          store_path: Path | None, kb: Path | None, mock_script: Path | None,
          backend_url: str | None, static_dir: Path | None) -> None:
    """Run the HTTP API plus the review console."""
    import uvicorn

    from .api import build_state, create_app

    if store_path:
        cfg.store_path = store_path
    if kb:
        cfg.kb_path = kb
    if mock_script:
        cfg.mock_script = mock_script
    if backend_url:
        cfg.backend.url = backend_url
    if static_dir:
        cfg.static_dir = static_dir
    try:
        state = build_state(cfg)
    except MaltriageError as exc:
        raise _fail(str(exc))
    app = create_app(state, static_dir=cfg.static_dir)
    uvicorn.run(app, host=host or cfg.host, port=port or cfg.port)


if __name__ == "__main__":
    sys.exit(main())
