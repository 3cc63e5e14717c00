"""Perplexity computation and model comparison tables.

Perplexity is exp of the mean negative log-likelihood per token, natural
log throughout. The comparison table reports each model's mean relative
to the best model per data kind, because absolute values are only
comparable within one tokenizer; the scorer id (which names its
tokenizer) therefore travels with every result.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Mapping

from . import MaltriageError
from .backend import BackendError, TokenScore
from .corpus import CodeSample


logger = logging.getLogger(__name__)


class PerplexityError(MaltriageError):
    pass


@dataclass
class PerplexityResult:
    sample_id: str
    token_count: int
    perplexity: float
    scorer_id: str


@dataclass
class CorpusEvaluation:
    results: list[PerplexityResult]
    skipped: list[str]  # sample ids the scorer failed on
    macro_mean: float  # mean of per-sample perplexities
    token_weighted: float  # corpus-level, over the pooled logprobs
    scorer_id: str


def perplexity(scores: list[TokenScore]) -> float:
    """exp(-(1/T) * sum of logprobs). Undefined for an empty sequence."""
    if not scores:
        raise PerplexityError("perplexity is undefined for an empty token list")
    mean_nll = -sum(s.logprob for s in scores) / len(scores)
    return math.exp(mean_nll)


def evaluate_corpus(samples: Iterable[CodeSample], scorer) -> CorpusEvaluation:
    """Score every sample; report per-sample perplexities plus both
    aggregate styles (macro mean of sample perplexities and the pooled
    token-weighted corpus perplexity), since the two answer different
    questions."""
    samples = list(samples)
    if not samples:
        raise PerplexityError("cannot evaluate an empty corpus")

    results: list[PerplexityResult] = []
    skipped: list[str] = []
    total_logprob = 0.0
    total_tokens = 0
    for sample in samples:
        try:
            scores = scorer.score_tokens(sample.body)
        except BackendError as exc:
            logger.warning("scorer failed on %s: %s", sample.id, exc)
            skipped.append(sample.id)
            continue
        results.append(PerplexityResult(
            sample_id=sample.id, token_count=len(scores),
            perplexity=perplexity(scores), scorer_id=scorer.scorer_id))
        total_logprob += sum(s.logprob for s in scores)
        total_tokens += len(scores)

    if not results:
        raise PerplexityError(
            f"scorer failed on every sample ({len(skipped)} skipped)")
    macro = sum(r.perplexity for r in results) / len(results)
    token_weighted = math.exp(-total_logprob / total_tokens)
    return CorpusEvaluation(results=results, skipped=skipped, macro_mean=macro,
                            token_weighted=token_weighted,
                            scorer_id=scorer.scorer_id)


@dataclass
class TableRow:
    data_kind: str
    model: str
    mean_perplexity: float
    ratio: str  # e.g. "6.52x" rendering uses the multiplication sign
    is_best: bool


@dataclass
class ComparisonTable:
    rows: list[TableRow]
    best_models: dict[str, str]


def _render_ratio(value: float) -> str:
    # Half-up to two decimals; Python's round() is half-even, which is
    # the wrong convention for published tables.
    q = Decimal(str(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return f"{q}×"


def relative_table(means: Mapping[str, Mapping[str, float]]) -> ComparisonTable:
    """Build the per-data-kind comparison from mean perplexities.

    ``means`` maps data kind -> model -> mean perplexity; insertion
    order of both mappings is preserved in the output. The best model
    per kind is the minimum mean (ties broken by model name) and renders
    as 1.00x; every other ratio is mean/best.
    """
    rows: list[TableRow] = []
    best_models: dict[str, str] = {}
    for data_kind, model_means in means.items():
        if not model_means:
            raise PerplexityError(f"no models for data kind {data_kind!r}")
        for model, mean in model_means.items():
            if not math.isfinite(mean) or mean < 1.0:
                raise PerplexityError(
                    f"{data_kind}/{model}: mean perplexity {mean} is not a "
                    "valid probability-model perplexity (must be finite, >= 1)")
        best_model = min(model_means, key=lambda m: (model_means[m], m))
        best = model_means[best_model]
        best_models[data_kind] = best_model
        for model, mean in model_means.items():
            rows.append(TableRow(data_kind=data_kind, model=model,
                                 mean_perplexity=mean,
                                 ratio=_render_ratio(mean / best),
                                 is_best=(model == best_model)))
    return ComparisonTable(rows=rows, best_models=best_models)


def render_table(table: ComparisonTable) -> str:
    """Aligned-text rendering for terminals."""
    headers = ("Data", "Model", "Perplexity", "Relative")
    cells = [(r.data_kind, r.model, f"{r.mean_perplexity:.3f}",
              r.ratio + (" (best)" if r.is_best else "")) for r in table.rows]
    widths = [max(len(h), *(len(c[i]) for c in cells)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    lines.append("  ".join("-" * w for w in widths))
    for row in cells:
        lines.append("  ".join(row[i].ljust(widths[i]) for i in range(len(headers))))
    return "\n".join(lines)


def write_results_csv(evaluation: CorpusEvaluation, path: str | Path) -> None:
    """Per-sample scores as CSV (sample_index, sample_id, token_count,
    perplexity, scorer_id): plot-ready data, rendering is someone
    else's job."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_index", "sample_id", "token_count",
                         "perplexity", "scorer_id"])
        for i, r in enumerate(evaluation.results):
            writer.writerow([i, r.sample_id, r.token_count,
                             repr(r.perplexity), r.scorer_id])


def write_table_csv(table: ComparisonTable, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["data_kind", "model", "mean_perplexity",
                         "relative", "best"])
        for r in table.rows:
            writer.writerow([r.data_kind, r.model, repr(r.mean_perplexity),
                             r.ratio, "1" if r.is_best else "0"])
