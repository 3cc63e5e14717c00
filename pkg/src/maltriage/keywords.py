"""Behavior keyword extraction for prompt enrichment.

Pipeline per sample: encode the snippet, retrieve the closest technique
documents, pull TF-IDF candidate terms out of them, then re-rank the
candidates by cosine similarity to the snippet and keep the top few.
Every stage is deterministic given the same snapshot and encoder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from .corpus import CodeSample
from .encoding import cosine
from .knowledge import KnowledgeDoc, KnowledgeIndex, retrieve

DEFAULT_KEYWORD_LIMIT = 10
DEFAULT_CANDIDATE_POOL = 50
DEFAULT_RETRIEVE_N = 5


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    """Fixed English stopword list shipped as a versioned data file.
    Changing the file is a breaking change to golden outputs."""
    text = resources.files("maltriage").joinpath("data/stopwords.txt").read_text("utf-8")
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


@dataclass
class RagConfig:
    retrieve_n: int = DEFAULT_RETRIEVE_N
    keyword_limit: int = DEFAULT_KEYWORD_LIMIT
    candidate_pool: int | None = DEFAULT_CANDIDATE_POOL  # None = unbounded

    def __post_init__(self) -> None:
        if self.retrieve_n < 1:
            raise ValueError("retrieve_n must be >= 1")
        if self.keyword_limit < 1:
            raise ValueError("keyword_limit must be >= 1")
        if self.candidate_pool is not None and self.candidate_pool < self.keyword_limit:
            raise ValueError("candidate_pool must be >= keyword_limit")


@dataclass
class KeywordCandidate:
    term: str
    tfidf_score: float
    source_doc_ids: list[str]
    similarity: float = 0.0


@dataclass
class KeywordSet:
    keywords: list[str] = field(default_factory=list)
    provenance: list[KeywordCandidate] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.keywords)


def idf(index: KnowledgeIndex, term: str) -> float:
    """Smoothed inverse document frequency: ln((1+N)/(1+df)) + 1.

    The +1 terms keep unseen tokens finite and all-docs tokens nonzero;
    the exact form is pinned because oracle tests recompute it.
    """
    df = index.doc_frequency.get(term, 0)
    return math.log((1 + len(index)) / (1 + df)) + 1.0


def tfidf_candidates(docs: list[KnowledgeDoc], index: KnowledgeIndex,
                     pool: int | None = DEFAULT_CANDIDATE_POOL) -> list[KeywordCandidate]:
    """Score every non-stopword token of the retrieved docs by tf·idf.

    tf is the raw count summed across the retrieved docs; idf comes from
    the whole index. Returns the top ``pool`` candidates (score
    descending, ties by term ascending), or all of them when pool is
    None.
    """
    drop = stopwords()
    tf: dict[str, int] = {}
    sources: dict[str, list[str]] = {}
    for doc in docs:
        if not index.contains(doc.doc_id):
            raise ValueError(f"doc {doc.doc_id!r} is not part of the index")
        for term, count in index.tokens_for(doc.doc_id).items():
            if term in drop:
                continue
            tf[term] = tf.get(term, 0) + count
            sources.setdefault(term, []).append(doc.doc_id)

    candidates = [
        KeywordCandidate(term=term, tfidf_score=count * idf(index, term),
                         source_doc_ids=sources[term])
        for term, count in tf.items()
    ]
    candidates.sort(key=lambda c: (-c.tfidf_score, c.term))
    return candidates if pool is None else candidates[:pool]


def extract_keywords(snippet: CodeSample, index: KnowledgeIndex,
                     cfg: RagConfig | None = None, encoder=None) -> KeywordSet:
    """Full keyword extraction for one snippet.

    Candidate generation uses TF-IDF only; the final ranking is cosine
    similarity between each term and the snippet vector, with tf·idf and
    then the term itself as tie-breaks, truncated to the keyword limit.
    """
    cfg = cfg or RagConfig()
    encoder = encoder or index.encoder
    if encoder.dimension != index.dimension:
        raise ValueError("encoder dimension does not match the index")

    snippet_vec = encoder.encode(snippet.body)
    hits = retrieve(index, snippet_vec, n=cfg.retrieve_n)
    if not hits:
        return KeywordSet()

    candidates = tfidf_candidates([doc for doc, _ in hits], index,
                                  pool=cfg.candidate_pool)
    for cand in candidates:
        cand.similarity = cosine(encoder.encode(cand.term), snippet_vec)

    candidates.sort(key=lambda c: (-c.similarity, -c.tfidf_score, c.term))
    top = candidates[:cfg.keyword_limit]
    return KeywordSet(keywords=[c.term for c in top], provenance=top)
