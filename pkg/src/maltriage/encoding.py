"""Deterministic text encoding into fixed-dimension semantic vectors.

The default encoder is a hashed bag-of-tokens: no model weights, no
network, bit-identical output for identical input. A remote embedding
provider can be dropped in behind the same contract when vector quality
matters more than reproducibility.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field

import httpx
import numpy as np

from . import MaltriageError

DEFAULT_DIMENSION = 4096

# Shared tokenizer contract: lowercase, tokens are maximal runs of
# [a-z0-9_], tokens shorter than 2 chars are dropped. The keyword
# extractor and the knowledge index must use the same rules, otherwise
# query-time terms stop lining up with indexed ones.
_TOKEN_RE = re.compile(r"[a-z0-9_]+")
MIN_TOKEN_LEN = 2

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


class EncoderError(MaltriageError):
    pass


class EncoderConfigError(EncoderError):
    """Non-retryable misconfiguration, e.g. provider dimension mismatch."""


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= MIN_TOKEN_LEN]


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _U64
    return h


def token_bucket(token: str, dimension: int) -> int:
    return fnv1a64(token.encode("utf-8")) % dimension


@dataclass(eq=False)
class SemanticVector:
    values: np.ndarray
    norm: float

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])

    @property
    def is_zero(self) -> bool:
        return self.norm == 0.0


def _normalized(values: np.ndarray) -> SemanticVector:
    values = np.asarray(values, dtype=np.float64)
    norm = float(np.linalg.norm(values))
    if norm > 0.0:
        values = values / norm
        unit = SemanticVector(values=values, norm=1.0)
    else:
        unit = SemanticVector(values=values, norm=0.0)
    unit.values.flags.writeable = False
    return unit


def cosine(a: SemanticVector, b: SemanticVector) -> float:
    """Cosine similarity; zero vectors compare as 0 rather than erroring,
    so empty snippets rank nothing highly instead of crashing a batch."""
    if a.dimension != b.dimension:
        raise EncoderError(f"dimension mismatch: {a.dimension} vs {b.dimension}")
    if a.is_zero or b.is_zero:
        return 0.0
    return float(np.dot(a.values, b.values))


class HashingEncoder:
    """Hash each token with 64-bit FNV-1a into a fixed-size bucket array,
    accumulate counts, L2-normalize."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 1:
            raise EncoderConfigError("dimension must be >= 1")
        self.dimension = dimension

    @property
    def encoder_id(self) -> str:
        return f"hashing(dim={self.dimension})"

    def encode(self, text: str) -> SemanticVector:
        counts = np.zeros(self.dimension, dtype=np.float64)
        for token in tokenize(text):
            counts[token_bucket(token, self.dimension)] += 1.0
        return _normalized(counts)


@dataclass
class RemoteEncoderConfig:
    url: str
    dimension: int
    timeout: float = 30.0
    retries: int = 2
    max_in_flight: int = 4
    headers: dict[str, str] = field(default_factory=dict)


class RemoteEncoder:
    """Embedding provider over HTTP.

    Wire format: POST ``{"input": "<text>"}``, response
    ``{"embedding": [floats]}``. The vector is length-checked and
    L2-normalized before use. Timeouts are retried; a dimension mismatch
    is config rot and is never retried.
    """

    def __init__(self, config: RemoteEncoderConfig):
        if config.dimension < 1:
            raise EncoderConfigError("dimension must be >= 1")
        self.config = config
        limits = httpx.Limits(max_connections=config.max_in_flight)
        self._client = httpx.Client(timeout=config.timeout,
                                    headers=config.headers, limits=limits)

    @property
    def dimension(self) -> int:
        return self.config.dimension

    @property
    def encoder_id(self) -> str:
        return f"remote({self.config.url},dim={self.config.dimension})"

    def encode(self, text: str) -> SemanticVector:
        last_exc: Exception | None = None
        for attempt in range(self.config.retries + 1):
            try:
                resp = self._client.post(self.config.url, json={"input": text})
                resp.raise_for_status()
                payload = resp.json()
                break
            except httpx.HTTPError as exc:
                last_exc = exc
                if attempt < self.config.retries:
                    time.sleep(min(0.2 * (attempt + 1), 1.0))
        else:
            raise EncoderError(f"embedding provider failed after "
                               f"{self.config.retries + 1} attempts: {last_exc}")

        embedding = payload.get("embedding")
        if not isinstance(embedding, list):
            raise EncoderError("provider response missing 'embedding' array")
        if len(embedding) != self.config.dimension:
            raise EncoderConfigError(
                f"provider returned dimension {len(embedding)}, "
                f"configured {self.config.dimension}")
        return _normalized(np.array(embedding, dtype=np.float64))

    def close(self) -> None:
        self._client.close()
