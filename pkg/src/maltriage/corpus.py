"""Code samples and dataset manifests.

Samples are plain files on disk; manifests are JSON documents that
declare per-dataset counts plus column totals, so a transcription of a
published dataset table can be checked arithmetically.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from . import MaltriageError

logger = logging.getLogger(__name__)

SAMPLE_KINDS = ("source", "assembly")

# Extension-based kind inference for directory scans; anything unlisted
# falls back to "source" unless the caller forces a kind.
_ASSEMBLY_SUFFIXES = {".asm", ".s"}

COUNT_COLUMNS = ("source", "nld", "assembly", "binary")


class CorpusError(MaltriageError):
    pass


@dataclass
class CodeSample:
    """A single source or assembly snippet under analysis."""

    id: str
    body: str
    kind: str = "source"
    language_hint: str | None = None
    origin_dataset: str | None = None
    lossy_decode: bool = False

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("sample id must be non-empty")
        if not self.body:
            raise CorpusError(f"sample {self.id!r} has an empty body")
        if self.kind not in SAMPLE_KINDS:
            raise CorpusError(f"sample kind must be one of {SAMPLE_KINDS}, got {self.kind!r}")


@dataclass
class DatasetEntry:
    name: str
    source: int
    nld: int
    assembly: int
    binary: int

    def count(self, column: str) -> int:
        return int(getattr(self, column))


@dataclass
class CorpusManifest:
    datasets: list[DatasetEntry]
    declared_totals: dict[str, int]


@dataclass
class ColumnCheck:
    column: str
    computed: int
    declared: int

    @property
    def match(self) -> bool:
        return self.computed == self.declared


@dataclass
class VerificationReport:
    columns: list[ColumnCheck]

    @property
    def all_match(self) -> bool:
        return all(c.match for c in self.columns)


def _require_nonneg(value: object, what: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise CorpusError(f"{what} must be an integer, got {value!r}")
    if value < 0:
        raise CorpusError(f"{what} must be >= 0, got {value}")
    return value


def load_manifest(path: str | Path) -> CorpusManifest:
    """Load and validate a dataset manifest.

    Totals are carried as declared; whether they add up is the job of
    :func:`verify_manifest`, not the loader.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read manifest {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"malformed manifest {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorpusError("manifest root must be a JSON object")

    datasets: list[DatasetEntry] = []
    seen: set[str] = set()
    for i, entry in enumerate(doc.get("datasets", [])):
        if not isinstance(entry, dict):
            raise CorpusError(f"datasets[{i}] must be an object")
        name = entry.get("name")
        if not isinstance(name, str) or not name:
            raise CorpusError(f"datasets[{i}] needs a non-empty name")
        if name in seen:
            raise CorpusError(f"duplicate dataset name {name!r}")
        seen.add(name)
        counts = {
            col: _require_nonneg(entry.get(col, 0), f"datasets[{i}].{col}")
            for col in COUNT_COLUMNS
        }
        datasets.append(DatasetEntry(name=name, **counts))

    totals_doc = doc.get("totals", {})
    if not isinstance(totals_doc, dict):
        raise CorpusError("totals must be an object")
    declared = {
        col: _require_nonneg(totals_doc.get(col, 0), f"totals.{col}")
        for col in COUNT_COLUMNS
    }
    return CorpusManifest(datasets=datasets, declared_totals=declared)


def verify_manifest(manifest: CorpusManifest) -> VerificationReport:
    """Recompute column sums and compare against declared totals.

    A mismatch is reported, not raised; callers decide whether it is
    fatal for them.
    """
    checks = []
    for col in COUNT_COLUMNS:
        computed = sum(d.count(col) for d in manifest.datasets)
        checks.append(ColumnCheck(column=col, computed=computed,
                                  declared=manifest.declared_totals[col]))
    return VerificationReport(columns=checks)


def _infer_kind(path: Path) -> str:
    return "assembly" if path.suffix.lower() in _ASSEMBLY_SUFFIXES else "source"


def iter_samples(directory: str | Path, kind: str | None = None,
                 skipped: list[str] | None = None) -> Iterator[CodeSample]:
    """Yield one CodeSample per regular file, in lexicographic name order.

    Unreadable files are skipped with a warning (and recorded in
    ``skipped`` when a list is supplied); bytes that are not valid UTF-8
    are replaced and the sample is flagged ``lossy_decode``. Real dumps
    contain junk bytes and must not abort a batch.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise CorpusError(f"not a directory: {directory}")
    if kind is not None and kind not in SAMPLE_KINDS:
        raise CorpusError(f"kind must be one of {SAMPLE_KINDS}, got {kind!r}")

    for path in sorted(directory.iterdir(), key=lambda p: p.name):
        if path.is_dir():
            continue
        try:
            data = path.read_bytes()
        except OSError as exc:
            logger.warning("skipping unreadable sample %s: %s", path, exc)
            if skipped is not None:
                skipped.append(str(path))
            continue
        lossy = False
        try:
            body = data.decode("utf-8")
        except UnicodeDecodeError:
            body = data.decode("utf-8", errors="replace")
            lossy = True
            logger.warning("sample %s is not valid UTF-8; bytes replaced", path)
        if not body:
            logger.warning("skipping empty sample %s", path)
            if skipped is not None:
                skipped.append(str(path))
            continue
        yield CodeSample(
            id=path.stem,
            body=body,
            kind=kind or _infer_kind(path),
            lossy_decode=lossy,
        )


@dataclass
class SampleLoad:
    samples: list[CodeSample]
    skipped: list[str] = field(default_factory=list)


def load_samples(directory: str | Path, kind: str | None = None) -> SampleLoad:
    """Collect :func:`iter_samples` output along with the skip list."""
    skipped: list[str] = []
    samples = list(iter_samples(directory, kind=kind, skipped=skipped))
    return SampleLoad(samples=samples, skipped=skipped)


def load_sample_file(path: str | Path, kind: str | None = None) -> CodeSample:
    """Load a single sample file; unlike directory scans, failure here
    is an error because the caller named the file explicitly."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CorpusError(f"cannot read sample {path}: {exc}") from exc
    lossy = False
    try:
        body = data.decode("utf-8")
    except UnicodeDecodeError:
        body = data.decode("utf-8", errors="replace")
        lossy = True
    return CodeSample(id=path.stem, body=body, kind=kind or _infer_kind(path),
                      lossy_decode=lossy)
