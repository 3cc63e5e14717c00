"""Offline attack-technique knowledge base with exact vector retrieval.

The snapshot is a JSON Lines file, one technique document per line
(doc_id, name, description, tactics, optional url). The catalog is a
few hundred documents, so retrieval is an exhaustive cosine scan —
exact, deterministic, and oracle-testable. No approximate indexes.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import MaltriageError
from .encoding import SemanticVector, tokenize

DEFAULT_RETRIEVE_N = 5


class KnowledgeError(MaltriageError):
    pass


@dataclass
class KnowledgeDoc:
    doc_id: str
    name: str
    description: str
    tactics: list[str] = field(default_factory=list)
    url: str | None = None

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise KnowledgeError("doc_id must be non-empty")
        if not self.description:
            raise KnowledgeError(f"doc {self.doc_id}: description must be non-empty")

    @property
    def text(self) -> str:
        """The indexed text: name and description together."""
        return f"{self.name}\n{self.description}"


def ingest_snapshot(path: str | Path) -> list[KnowledgeDoc]:
    """Parse a snapshot file, preserving file order.

    Malformed lines and duplicate doc_ids are hard errors: a broken
    knowledge base silently degrades every downstream keyword, so refuse
    to load one.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise KnowledgeError(f"cannot read snapshot {path}: {exc}") from exc

    docs: list[KnowledgeDoc] = []
    seen: set[str] = set()
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise KnowledgeError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise KnowledgeError(f"{path}:{lineno}: expected an object")
        try:
            doc = KnowledgeDoc(
                doc_id=obj.get("doc_id", ""),
                name=obj.get("name", ""),
                description=obj.get("description", ""),
                tactics=list(obj.get("tactics", []) or []),
                url=obj.get("url"),
            )
        except KnowledgeError as exc:
            raise KnowledgeError(f"{path}:{lineno}: {exc}") from exc
        if doc.doc_id in seen:
            raise KnowledgeError(f"{path}:{lineno}: duplicate doc_id {doc.doc_id!r}")
        seen.add(doc.doc_id)
        docs.append(doc)
    return docs


class KnowledgeIndex:
    """Immutable retrieval index: one vector per document plus token
    statistics for TF-IDF. Safe to share across concurrent workers."""

    def __init__(self, docs: list[KnowledgeDoc], encoder):
        self.docs = list(docs)
        self.encoder = encoder
        self.dimension = encoder.dimension
        self._pos = {d.doc_id: i for i, d in enumerate(self.docs)}
        if len(self._pos) != len(self.docs):
            raise KnowledgeError("duplicate doc_id in index build")

        vectors = np.zeros((len(self.docs), self.dimension), dtype=np.float64)
        self.doc_tokens: list[Counter[str]] = []
        for i, doc in enumerate(self.docs):
            vectors[i] = encoder.encode(doc.text).values
            self.doc_tokens.append(Counter(tokenize(doc.text)))
        vectors.flags.writeable = False
        self._vectors = vectors

        df: Counter[str] = Counter()
        for counts in self.doc_tokens:
            df.update(counts.keys())
        self.doc_frequency: dict[str, int] = dict(df)

    def __len__(self) -> int:
        return len(self.docs)

    def doc_vector(self, doc_id: str) -> SemanticVector:
        row = self._vectors[self._pos[doc_id]]
        norm = float(np.linalg.norm(row))
        return SemanticVector(values=row, norm=1.0 if norm > 0 else 0.0)

    def tokens_for(self, doc_id: str) -> Counter[str]:
        return self.doc_tokens[self._pos[doc_id]]

    def contains(self, doc_id: str) -> bool:
        return doc_id in self._pos


def build_index(docs: list[KnowledgeDoc], encoder) -> KnowledgeIndex:
    return KnowledgeIndex(docs, encoder)


def retrieve(index: KnowledgeIndex, query: SemanticVector,
             n: int = DEFAULT_RETRIEVE_N) -> list[tuple[KnowledgeDoc, float]]:
    """Top-n documents by cosine score, descending; ties broken by
    ascending doc_id so results are fully deterministic."""
    if n < 1:
        raise KnowledgeError(f"n must be >= 1, got {n}")
    if not index.docs:
        return []
    if query.dimension != index.dimension:
        raise KnowledgeError(
            f"query dimension {query.dimension} != index dimension {index.dimension}")

    if query.is_zero:
        scores = np.zeros(len(index.docs), dtype=np.float64)
    else:
        scores = index._vectors @ query.values
    order = sorted(range(len(index.docs)),
                   key=lambda i: (-scores[i], index.docs[i].doc_id))
    return [(index.docs[i], float(scores[i])) for i in order[:n]]
