"""Independent reference implementations used as test oracles.

Everything here is deliberately written from the stated definitions with
plain Python (sparse dicts, full sorts, no shared code with the package)
so it can catch shortcuts or indexing bugs in the production path.
"""

from __future__ import annotations

import math
import re

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = (1 << 64) - 1


def ref_tokenize(text: str) -> list[str]:
    return [t for t in re.findall(r"[a-z0-9_]+", text.lower()) if len(t) >= 2]


def ref_bucket(token: str, dim: int) -> int:
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK
    return h % dim


def ref_encode(text: str, dim: int) -> dict[int, float]:
    """Sparse normalized bag-of-hashed-tokens: bucket -> weight."""
    counts: dict[int, float] = {}
    for token in ref_tokenize(text):
        b = ref_bucket(token, dim)
        counts[b] = counts.get(b, 0.0) + 1.0
    norm = math.sqrt(sum(v * v for v in counts.values()))
    if norm == 0.0:
        return {}
    return {b: v / norm for b, v in counts.items()}


def ref_cosine(a: dict[int, float], b: dict[int, float]) -> float:
    if not a or not b:
        return 0.0
    if len(b) < len(a):
        a, b = b, a
    return sum(v * b[k] for k, v in a.items() if k in b)


def ref_extract_keywords(body: str, docs: list[tuple[str, str]],
                         stopword_set: frozenset[str], *, dim: int,
                         retrieve_n: int, pool: int | None,
                         limit: int) -> list[str]:
    """Exhaustive retrieval, full TF-IDF, full similarity sort.

    ``docs`` is (doc_id, indexed_text) in snapshot order.
    """
    query = ref_encode(body, dim)

    # exhaustive retrieval over every doc, ties by ascending doc_id
    scored = [(ref_cosine(ref_encode(text, dim), query), doc_id)
              for doc_id, text in docs]
    scored.sort(key=lambda p: (-p[0], p[1]))
    retrieved = {doc_id for _, doc_id in scored[:retrieve_n]}

    # raw tf across retrieved docs, smoothed idf over the whole corpus
    doc_tokens = {doc_id: ref_tokenize(text) for doc_id, text in docs}
    tf: dict[str, int] = {}
    for doc_id in doc_tokens:
        if doc_id not in retrieved:
            continue
        for token in doc_tokens[doc_id]:
            if token in stopword_set:
                continue
            tf[token] = tf.get(token, 0) + 1
    df: dict[str, int] = {}
    for doc_id, tokens in doc_tokens.items():
        for token in set(tokens):
            df[token] = df.get(token, 0) + 1

    n_docs = len(docs)
    tfidf = {t: c * (math.log((1 + n_docs) / (1 + df[t])) + 1.0)
             for t, c in tf.items()}
    candidates = sorted(tfidf, key=lambda t: (-tfidf[t], t))
    if pool is not None:
        candidates = candidates[:pool]

    sims = {t: ref_cosine(ref_encode(t, dim), query) for t in candidates}
    candidates.sort(key=lambda t: (-sims[t], -tfidf[t], t))
    return candidates[:limit]


def ref_perplexity(logprobs: list[float]) -> float:
    return math.exp(-sum(logprobs) / len(logprobs))
