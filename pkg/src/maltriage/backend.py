"""Text-generation and token-scoring backends.

One contract, two families: a remote chat-completion client for real
models, and deterministic scripted stand-ins that make the whole
pipeline testable offline. Scorers expose per-token log-probabilities
for the perplexity harness; any scorer satisfying the contract plugs in.
"""

from __future__ import annotations

import json
import math
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from . import MaltriageError
from .prompting import PromptText

MAX_RETRIES = 5


class BackendError(MaltriageError):
    """A generation/scoring call failed; batch runs record it per sample."""


class BackendConfigError(BackendError):
    """The backend itself is misconfigured (bad script, bad endpoint)."""


@dataclass
class GenerationParams:
    max_tokens: int = 1024
    temperature: float = 0.0  # classification wants reproducible labels
    stop_sequences: list[str] = field(default_factory=list)
    request_timeout: float = 30.0
    retries: int = 2

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 <= self.retries <= MAX_RETRIES:
            raise ValueError(f"retries must be in [0, {MAX_RETRIES}]")
        if self.request_timeout <= 0:
            raise ValueError("request_timeout must be positive")


@dataclass(frozen=True)
class TokenScore:
    token: str
    logprob: float  # natural log, <= 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.logprob):
            raise ValueError(f"logprob must be finite, got {self.logprob}")
        if self.logprob > 0:
            raise ValueError(f"logprob must be <= 0, got {self.logprob}")


# --- scripted mock -----------------------------------------------------------

@dataclass
class MockRule:
    response: str
    contains: str | None = None
    regex: re.Pattern | None = None
    fail_message: str | None = None

    def matches(self, text: str) -> bool:
        if self.contains is not None:
            return self.contains in text
        if self.regex is not None:
            return self.regex.search(text) is not None
        return True  # no match clause = default rule


class MockBackend:
    """Answers prompts from an ordered rule list.

    Script format (JSON array): each entry has an optional ``match``
    object (``{"contains": s}`` or ``{"regex": s}``; omitted = default
    rule) and one of ``response``, ``response_file``, or ``fail`` (a
    message; the rule raises a BackendError, so failures are scriptable
    too). First matching rule wins; no match and no default is a script
    configuration error.
    """

    def __init__(self, rules: list[MockRule]):
        self.rules = rules

    @classmethod
    def from_script(cls, path: str | Path) -> "MockBackend":
        path = Path(path)
        try:
            entries = json.loads(path.read_text("utf-8"))
        except OSError as exc:
            raise BackendConfigError(f"cannot read mock script {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise BackendConfigError(f"malformed mock script {path}: {exc}") from exc
        if not isinstance(entries, list):
            raise BackendConfigError("mock script must be a JSON array of rules")

        rules = []
        for i, entry in enumerate(entries):
            match = entry.get("match", {})
            contains = match.get("contains")
            regex = re.compile(match["regex"]) if "regex" in match else None
            if "fail" in entry:
                rules.append(MockRule(response="", contains=contains, regex=regex,
                                      fail_message=str(entry["fail"])))
                continue
            if "response_file" in entry:
                response = (path.parent / entry["response_file"]).read_text("utf-8")
            elif "response" in entry:
                response = str(entry["response"])
            else:
                raise BackendConfigError(
                    f"mock script rule {i} needs response, response_file, or fail")
            rules.append(MockRule(response=response, contains=contains, regex=regex))
        return cls(rules)

    def complete(self, prompt: PromptText, params: GenerationParams | None = None) -> str:
        text = prompt.full_text
        for rule in self.rules:
            if rule.matches(text):
                if rule.fail_message is not None:
                    raise BackendError(f"scripted failure: {rule.fail_message}")
                return rule.response
        raise BackendConfigError("no mock rule matched and no default rule is present")


# --- remote chat completion --------------------------------------------------

@dataclass
class RemoteBackendConfig:
    url: str
    model: str
    auth_token: str | None = None
    max_in_flight: int = 4


class HttpBackend:
    """Minimal chat-completion client: messages array in,
    choices[0].message.content out."""

    def __init__(self, config: RemoteBackendConfig):
        self.config = config
        headers = {}
        if config.auth_token:
            headers["Authorization"] = f"Bearer {config.auth_token}"
        limits = httpx.Limits(max_connections=config.max_in_flight)
        self._client = httpx.Client(headers=headers, limits=limits)

    def complete(self, prompt: PromptText, params: GenerationParams | None = None) -> str:
        params = params or GenerationParams()
        payload = {
            "model": self.config.model,
            "messages": [{"role": f.role, "content": f.content}
                         for f in prompt.role_frames],
            "max_tokens": params.max_tokens,
            "temperature": params.temperature,
        }
        if params.stop_sequences:
            payload["stop"] = params.stop_sequences

        last_exc: Exception | None = None
        for attempt in range(params.retries + 1):
            try:
                resp = self._client.post(self.config.url, json=payload,
                                         timeout=params.request_timeout)
                resp.raise_for_status()
                body = resp.json()
                content = body["choices"][0]["message"]["content"]
                if not isinstance(content, str) or not content:
                    raise BackendError("backend returned an empty completion")
                return content
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last_exc = exc
                if attempt < params.retries:
                    continue
        raise BackendError(f"generation failed after {params.retries + 1} "
                           f"attempts: {last_exc}")

    def close(self) -> None:
        self._client.close()


# --- token scorers -----------------------------------------------------------

def _whitespace_tokens(text: str) -> list[str]:
    return text.split()


class UniformScorer:
    """Uniform model over a vocabulary of size V: every token scores
    -ln(V). Its perplexity is exactly V for any sequence, which makes it
    the analytic ground truth for the evaluation harness."""

    def __init__(self, vocab_size: int):
        if vocab_size < 1:
            raise BackendConfigError("vocab_size must be >= 1")
        self.vocab_size = vocab_size
        self._logprob = -math.log(vocab_size)

    @property
    def scorer_id(self) -> str:
        return f"uniform(v={self.vocab_size},tok=whitespace)"

    def score_tokens(self, text: str) -> list[TokenScore]:
        tokens = _whitespace_tokens(text)
        if not tokens:
            raise BackendError("cannot score empty text")
        return [TokenScore(token=t, logprob=self._logprob) for t in tokens]


class ScriptedScorer:
    """Assigns explicit per-token probabilities, cycling the list when
    the text is longer than the script."""

    def __init__(self, probs: list[float]):
        if not probs:
            raise BackendConfigError("probs must be non-empty")
        for p in probs:
            if not 0 < p <= 1:
                raise BackendConfigError(f"probability out of range: {p}")
        self._logprobs = [math.log(p) for p in probs]

    @property
    def scorer_id(self) -> str:
        return f"scripted(n={len(self._logprobs)},tok=whitespace)"

    def score_tokens(self, text: str) -> list[TokenScore]:
        tokens = _whitespace_tokens(text)
        if not tokens:
            raise BackendError("cannot score empty text")
        return [TokenScore(token=t, logprob=self._logprobs[i % len(self._logprobs)])
                for i, t in enumerate(tokens)]


class RemoteScorer:
    """Token scoring over HTTP: POST ``{"text": ...}``, response
    ``{"tokens": [...], "logprobs": [...]}``. The provider's own
    tokenization is reported verbatim in the scorer id."""

    def __init__(self, url: str, timeout: float = 60.0,
                 tokenizer_name: str = "provider"):
        self.url = url
        self.timeout = timeout
        self.tokenizer_name = tokenizer_name
        self._client = httpx.Client(timeout=timeout)

    @property
    def scorer_id(self) -> str:
        return f"remote({self.url},tok={self.tokenizer_name})"

    def score_tokens(self, text: str) -> list[TokenScore]:
        if not text.split():
            raise BackendError("cannot score empty text")
        try:
            resp = self._client.post(self.url, json={"text": text})
            resp.raise_for_status()
            body = resp.json()
            tokens, logprobs = body["tokens"], body["logprobs"]
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise BackendError(f"remote scorer failed: {exc}") from exc
        if len(tokens) != len(logprobs) or not tokens:
            raise BackendError("remote scorer returned mismatched token/logprob arrays")
        return [TokenScore(token=t, logprob=float(lp))
                for t, lp in zip(tokens, logprobs)]

    def close(self) -> None:
        self._client.close()
