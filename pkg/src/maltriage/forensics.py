"""Parsing of free-text model output into structured, machine-readable
records.

Everything here is rule-based and pure: downstream log ingestion needs
deterministic parses, and an unparseable report must degrade to flagged
fields, never to a crash. The original text is always kept verbatim.
"""

from __future__ import annotations

import enum
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import MaltriageError
from .corpus import CodeSample

logger = logging.getLogger(__name__)


class ForensicsError(MaltriageError):
    pass


class Label(str, enum.Enum):
    MALWARE = "malware"
    BENIGN = "benign"
    PARTIALLY_MALICIOUS = "partially_malicious"

    @property
    def siem(self) -> str:
        """Uppercase, space-separated form used in exported records."""
        return self.value.replace("_", " ").upper()


SIEM_LABELS = {label.siem: label for label in Label}

PARSE_FLAGS = ("missing_conclusion", "missing_reasoning",
               "missing_evidence", "missing_suspicious")


@dataclass
class ForensicReport:
    conclusion: str = ""
    reasoning: str = ""
    evidence: list[str] = field(default_factory=list)
    suspicious_explanation: str = ""
    parse_flags: frozenset[str] = frozenset()
    raw_text: str = ""


@dataclass
class Verdict:
    label: Label | None
    verified: bool
    raw_response: str


@dataclass
class SiemRecord:
    # Field names and order are the exported wire schema; the odd
    # capitalization of final_Judgment is part of that schema. The
    # suspicious-element explanation is an opt-in trailing key, absent
    # by default.
    ID: str
    conclusion: str
    reasoning: str
    evidence: list[str]
    final_Judgment: str
    source_code: str
    suspicious_explanation: str | None = None

    def to_obj(self) -> dict:
        obj = {
            "ID": self.ID,
            "conclusion": self.conclusion,
            "reasoning": self.reasoning,
            "evidence": list(self.evidence),
            "final_Judgment": self.final_Judgment,
            "source_code": self.source_code,
        }
        if self.suspicious_explanation is not None:
            obj["suspicious_explanation"] = self.suspicious_explanation
        return obj

    @classmethod
    def from_obj(cls, obj: dict) -> "SiemRecord":
        try:
            record = cls(
                ID=obj["ID"],
                conclusion=obj["conclusion"],
                reasoning=obj["reasoning"],
                evidence=list(obj["evidence"]),
                final_Judgment=obj["final_Judgment"],
                source_code=obj["source_code"],
                suspicious_explanation=obj.get("suspicious_explanation"),
            )
        except (KeyError, TypeError) as exc:
            raise ForensicsError(f"malformed record object: {exc}") from exc
        if record.final_Judgment not in SIEM_LABELS:
            raise ForensicsError(f"unknown final_Judgment {record.final_Judgment!r}")
        return record


# Section headers: optional leading numbering/markup, a known title,
# then either end of line or an explicit separator before inline
# content. Requiring the separator keeps prose like "Evidence of
# tampering was found" from being mistaken for a header.
_SECTION_FIELDS = {
    "conclusion": "conclusion",
    "reasoning": "reasoning",
    "evidence": "evidence",
    "code evidence": "evidence",
    "explanation of suspicious elements": "suspicious",
    "suspicious element explanation": "suspicious",
}

_HEADER_RE = re.compile(
    r"""^\s*[#>*\-\s]*(?:\d+\s*[.):\]]\s*)?
        (?P<name>conclusion|reasoning|code\s+evidence|evidence
                 |explanation\s+of\s+suspicious\s+elements
                 |suspicious\s+element\s+explanation)
        (?:\*\*|__)?\s*
        (?:(?P<sep>[:\-–—])\s*(?P<rest>.*))?$""",
    re.IGNORECASE | re.VERBOSE,
)

_BULLET_RE = re.compile(r"^\s*(?:[-*•·]|\d+\s*[.)])\s+(?P<item>.*)$")


def _join_section(lines: list[str]) -> str:
    # Drop blank padding lines around the section, keep everything else
    # verbatim (including trailing spaces inside a line).
    start, end = 0, len(lines)
    while start < end and not lines[start].strip():
        start += 1
    while end > start and not lines[end - 1].strip():
        end -= 1
    return "\n".join(lines[start:end])


def _split_evidence(text: str) -> list[str]:
    items: list[str] = []
    plain: list[str] = []
    saw_bullet = False
    for line in text.splitlines():
        m = _BULLET_RE.match(line)
        if m:
            saw_bullet = True
            items.append(m.group("item"))
        elif line.strip():
            plain.append(line)
    if saw_bullet:
        return items
    joined = _join_section(plain)
    return [joined] if joined else []


def parse_report(text: str) -> ForensicReport:
    """Split model output into the four report fields by header lines.

    Header-keyed, not position-keyed: sections may arrive in any order.
    Text before the first header folds into the conclusion. Missing
    sections are flagged, never fatal, and the raw text is preserved
    byte-for-byte.
    """
    sections: dict[str, list[str]] = {"conclusion": [], "reasoning": [],
                                      "evidence": [], "suspicious": []}
    current: str | None = None
    preamble: list[str] = []
    for line in text.splitlines():
        m = _HEADER_RE.match(line)
        if m:
            name = re.sub(r"\s+", " ", m.group("name").lower())
            current = _SECTION_FIELDS[name]
            rest = m.group("rest")
            if rest:
                sections[current].append(rest)
            continue
        if current is None:
            preamble.append(line)
        else:
            sections[current].append(line)

    conclusion_parts = [p for p in (_join_section(preamble),
                                    _join_section(sections["conclusion"])) if p]
    conclusion = "\n".join(conclusion_parts)
    reasoning = _join_section(sections["reasoning"])
    evidence = _split_evidence("\n".join(sections["evidence"]))
    suspicious = _join_section(sections["suspicious"])

    flags = set()
    if not conclusion:
        flags.add("missing_conclusion")
    if not reasoning:
        flags.add("missing_reasoning")
    if not evidence:
        flags.add("missing_evidence")
    if not suspicious:
        flags.add("missing_suspicious")

    return ForensicReport(conclusion=conclusion, reasoning=reasoning,
                          evidence=evidence, suspicious_explanation=suspicious,
                          parse_flags=frozenset(flags), raw_text=text)


_SURROUNDING_PUNCT = " \t\"'`“”‘’.,;:!?()[]{}<>*-"


def _normalize_label_text(text: str) -> str:
    t = re.sub(r"\s+", " ", text.strip())
    t = t.strip(_SURROUNDING_PUNCT)
    return t.upper()


def parse_label(text: str) -> Verdict:
    """Map a model response onto the closed label set.

    Exact match after normalization verifies directly; otherwise a
    single fallback substring scan accepts the response only when
    exactly one label occurs in it. Ambiguity stays unverified; being
    unverified is a state, not an error.
    """
    normalized = _normalize_label_text(text)
    if normalized in SIEM_LABELS:
        return Verdict(label=SIEM_LABELS[normalized], verified=True, raw_response=text)
    found = [label for siem, label in SIEM_LABELS.items() if siem in normalized]
    # "PARTIALLY MALICIOUS" does not contain the other label strings, so
    # the scan cannot double-count a single well-formed answer.
    if len(found) == 1:
        return Verdict(label=found[0], verified=True, raw_response=text)
    return Verdict(label=None, verified=False, raw_response=text)


def to_siem_record(sample: CodeSample, report: ForensicReport, verdict: Verdict,
                   include_suspicious: bool = False) -> SiemRecord:
    """Assemble the export record for a verified analysis.

    The suspicious-element explanation is persisted in the store but not
    exported by default; ``include_suspicious`` appends it as a trailing
    seventh key for consumers that want it.
    """
    if not verdict.verified or verdict.label is None:
        raise ForensicsError("cannot build a record from an unverified verdict")
    _warn_on_disagreement(report, verdict, sample.id)
    return SiemRecord(
        ID=sample.id,
        conclusion=report.conclusion,
        reasoning=report.reasoning,
        evidence=list(report.evidence),
        final_Judgment=verdict.label.siem,
        source_code=sample.body,
        suspicious_explanation=report.suspicious_explanation if include_suspicious else None,
    )


def _warn_on_disagreement(report: ForensicReport, verdict: Verdict,
                          sample_id: str) -> None:
    # Conclusion text and final label are allowed to disagree (hedged
    # conclusions with a decisive label are a real model behavior); we
    # only surface it.
    mentioned = [label for siem, label in SIEM_LABELS.items()
                 if siem in _normalize_label_text(report.conclusion)]
    if len(mentioned) == 1 and mentioned[0] is not verdict.label:
        logger.warning("sample %s: conclusion mentions %s but final label is %s",
                       sample_id, mentioned[0].siem, verdict.label.siem)


def export_jsonl(records: list[SiemRecord], path: str | Path) -> int:
    """Write records as UTF-8 JSON Lines with LF newlines, keys in the
    fixed schema order. Returns the number of lines written."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for record in records:
                fh.write(json.dumps(record.to_obj(), ensure_ascii=False))
                fh.write("\n")
    except OSError as exc:
        raise ForensicsError(f"cannot write {path}: {exc}") from exc
    return len(records)


def read_jsonl(path: str | Path) -> list[SiemRecord]:
    path = Path(path)
    records = []
    try:
        with path.open(encoding="utf-8", newline="") as fh:
            content = fh.read()
    except OSError as exc:
        raise ForensicsError(f"cannot read {path}: {exc}") from exc
    # split strictly on LF: json never emits a raw \n inside a value, but
    # it does pass through exotic unicode line separators that
    # str.splitlines would wrongly treat as record boundaries
    for lineno, line in enumerate(content.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            records.append(SiemRecord.from_obj(json.loads(line)))
        except json.JSONDecodeError as exc:
            raise ForensicsError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
    return records
