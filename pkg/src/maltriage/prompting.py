"""Two-stage prompt construction.

Prompt 1 asks for a structured forensic report (four titled sections,
with retrieved behavior keywords injected as guidance); prompt 2
compresses a parsed report into a single closed-set verdict request.
Templates are versioned text files so rendered prompts are reproducible
and auditable; the version travels with every stored analysis.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from string import Template

from . import MaltriageError
from .corpus import CodeSample
from .forensics import ForensicReport
from .keywords import KeywordSet

PROMPT1_SECTION_TITLES = (
    "Conclusion",
    "Reasoning",
    "Evidence",
    "Explanation of Suspicious Elements",
)
VERDICT_LABELS = ("MALWARE", "BENIGN", "PARTIALLY MALICIOUS")

_SECTION_MARKER = re.compile(r"^=== (system|user) ===$")


class TemplateError(MaltriageError):
    pass


@dataclass(frozen=True)
class PromptFrame:
    role: str  # "system" or "user"
    content: str


@dataclass(frozen=True)
class PromptText:
    role_frames: tuple[PromptFrame, ...]
    template_id: str
    template_version: str

    @property
    def full_text(self) -> str:
        return "\n\n".join(f.content for f in self.role_frames)


@dataclass(frozen=True)
class _ParsedTemplate:
    version: str
    frames: tuple[tuple[str, Template], ...]
    raw_frames: tuple[tuple[str, str], ...]


def _parse_template(text: str, name: str) -> _ParsedTemplate:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("version:"):
        raise TemplateError(f"{name}: first line must be 'version: <id>'")
    version = lines[0].split(":", 1)[1].strip()
    if not version:
        raise TemplateError(f"{name}: empty template version")

    frames: list[tuple[str, str]] = []
    role: str | None = None
    buf: list[str] = []
    for line in lines[1:]:
        m = _SECTION_MARKER.match(line)
        if m:
            if role is not None:
                frames.append((role, "\n".join(buf)))
            role = m.group(1)
            buf = []
        elif role is not None:
            buf.append(line)
        elif line.strip():
            raise TemplateError(f"{name}: content before first role marker")
    if role is not None:
        frames.append((role, "\n".join(buf)))

    if not any(r == "user" for r, _ in frames):
        raise TemplateError(f"{name}: template needs at least one user frame")
    return _ParsedTemplate(version=version,
                           frames=tuple((r, Template(b)) for r, b in frames),
                           raw_frames=tuple(frames))


class TemplateSet:
    """prompt1.txt / prompt2.txt loaded from a directory (or the bundled
    defaults) and validated against the prompt contract."""

    def __init__(self, prompt1_text: str, prompt2_text: str):
        self.prompt1 = _parse_template(prompt1_text, "prompt1")
        self.prompt2 = _parse_template(prompt2_text, "prompt2")
        p1_all = "\n".join(body for _, body in self.prompt1.raw_frames)
        for title in PROMPT1_SECTION_TITLES:
            if title not in p1_all:
                raise TemplateError(f"prompt1 template must name section {title!r}")
        p2_all = "\n".join(body for _, body in self.prompt2.raw_frames)
        for label in VERDICT_LABELS:
            if label not in p2_all:
                raise TemplateError(f"prompt2 template must name label {label!r}")

    @classmethod
    def from_dir(cls, directory: str | Path) -> "TemplateSet":
        directory = Path(directory)
        try:
            return cls((directory / "prompt1.txt").read_text("utf-8"),
                       (directory / "prompt2.txt").read_text("utf-8"))
        except OSError as exc:
            raise TemplateError(f"cannot read templates from {directory}: {exc}") from exc

    @classmethod
    def bundled(cls) -> "TemplateSet":
        base = resources.files("maltriage").joinpath("templates")
        return cls(base.joinpath("prompt1.txt").read_text("utf-8"),
                   base.joinpath("prompt2.txt").read_text("utf-8"))


def choose_fence(body: str) -> str:
    """Pick a backtick fence strictly longer than any run inside the
    body, so hostile code cannot terminate its own enclosure."""
    longest = max((len(m.group(0)) for m in re.finditer(r"`+", body)), default=0)
    return "`" * max(3, longest + 1)


def _fenced(body: str) -> str:
    fence = choose_fence(body)
    tail = "" if body.endswith("\n") else "\n"
    return f"{fence}\n{body}{tail}{fence}"


def _render(parsed: _ParsedTemplate, template_id: str,
            substitutions: dict[str, str]) -> PromptText:
    frames = []
    for role, tmpl in parsed.frames:
        try:
            content = tmpl.substitute(substitutions)
        except (KeyError, ValueError) as exc:
            raise TemplateError(f"{template_id}: bad placeholder: {exc}") from exc
        frames.append(PromptFrame(role=role, content=content))
    if not any(f.content.strip() for f in frames):
        raise TemplateError(f"{template_id}: rendered prompt is empty")
    return PromptText(role_frames=tuple(frames), template_id=template_id,
                      template_version=parsed.version)


def build_prompt1(snippet: CodeSample, keywords: KeywordSet,
                  templates: TemplateSet | None = None) -> PromptText:
    """Render the forensic-analysis prompt for one sample.

    Keywords land in a single indicator line; with no keywords the line
    is omitted entirely rather than left dangling.
    """
    templates = templates or TemplateSet.bundled()
    if keywords.keywords:
        indicators = "Relevant behavior indicators: " + ", ".join(keywords.keywords) + "\n\n"
    else:
        indicators = ""
    return _render(templates.prompt1, "prompt1", {
        "indicators_section": indicators,
        "code_block": _fenced(snippet.body),
    })


def build_prompt2(report: ForensicReport,
                  templates: TemplateSet | None = None) -> PromptText:
    """Render the verdict prompt from a parsed report."""
    templates = templates or TemplateSet.bundled()
    evidence = "\n".join(f"- {item}" for item in report.evidence)
    return _render(templates.prompt2, "prompt2", {
        "conclusion": report.conclusion,
        "reasoning": report.reasoning,
        "evidence": evidence,
        "suspicious": report.suspicious_explanation,
    })
