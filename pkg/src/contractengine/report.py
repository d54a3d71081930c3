"""Structured legal report: data model, markdown parsing/rendering, and
label extraction for entailment-style questions.

The markdown skeleton uses six fixed headings; parsing is heading-anchored
and tolerant of case, trailing colons, and extra emphasis. Unknown extra
headings are folded into the nearest preceding known section.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import SchemaViolation

TITLE_HEADING = "## Title"
SECTION_HEADINGS = (
    "### Summary",
    "### Legal Reasoning & Analysis",
    "### Preliminary Answer & Direction for Further Research",
    "### Gaps & Next Questions",
    "### Sources",
)

DISCLAIMER = (
    "_This report is produced by an assistive analysis tool and does not "
    "constitute legal advice._"
)

_HEADING_LINE_RE = re.compile(r"^(#{1,6})\s*(.+?)\s*$", re.MULTILINE)
_SOURCE_LINE_RE = re.compile(r"^\s*(\d+)[.)]\s+(.*\S)\s*$")
_CITATION_RE = re.compile(r"\[(\d+)\]")
_QUOTE_RE = re.compile(r"[\"“]([^\"”]+)[\"”]")


@dataclass
class Source:
    number: int
    quote: str
    locator: str
    filename: str = ""


@dataclass
class Report:
    title: str = ""
    summary: str = ""
    legal_reasoning: str = ""
    preliminary_answer: str = ""
    gaps_and_questions: list[str] = field(default_factory=list)
    sources: list[Source] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "summary": self.summary,
            "legal_reasoning": self.legal_reasoning,
            "preliminary_answer": self.preliminary_answer,
            "gaps_and_questions": list(self.gaps_and_questions),
            "sources": [
                {
                    "number": s.number,
                    "quote": s.quote,
                    "locator": s.locator,
                    "filename": s.filename,
                }
                for s in self.sources
            ],
        }


def _canon_heading(text: str) -> str:
    return re.sub(r"[^a-z&]+", " ", text.lower().rstrip(": ")).strip()


_KNOWN = {
    _canon_heading("Title"): "title",
    _canon_heading("Summary"): "summary",
    _canon_heading("Legal Reasoning & Analysis"): "legal_reasoning",
    _canon_heading("Preliminary Answer & Direction for Further Research"): "preliminary_answer",
    _canon_heading("Gaps & Next Questions"): "gaps",
    _canon_heading("Sources"): "sources",
}


def _parse_sources(body: str) -> list[Source]:
    sources: list[Source] = []
    for line in body.splitlines():
        m = _SOURCE_LINE_RE.match(line)
        if not m:
            continue
        number = int(m.group(1))
        rest = m.group(2)
        qm = _QUOTE_RE.search(rest)
        quote = qm.group(1) if qm else ""
        remainder = (rest[:qm.start()] + rest[qm.end():]) if qm else rest
        parts = [p.strip(" -–") for p in re.split(r"\s+[—-]{1,2}\s+", remainder) if p.strip(" -–—")]
        locator = parts[0] if parts else remainder.strip()
        filename = parts[1] if len(parts) > 1 else ""
        sources.append(Source(number=number, quote=quote, locator=locator, filename=filename))
    return sources


def parse_report_markdown(text: str) -> Report:
    """Heading-anchored segmentation into the six report sections.

    Raises SchemaViolation when any of the six sections is missing.
    """
    matches = list(_HEADING_LINE_RE.finditer(text))
    if not matches:
        raise SchemaViolation("no markdown headings found")

    sections: dict[str, str] = {}
    current_key: Optional[str] = None
    buffer: dict[str, list[str]] = {}
    for i, m in enumerate(matches):
        title_text = m.group(2).strip().strip("*_").strip()
        key = _KNOWN.get(_canon_heading(title_text))
        if key is None and ":" in title_text:
            # heading with inline content, e.g. "Title: <actual title>"
            key = _KNOWN.get(_canon_heading(title_text.split(":", 1)[0]))
        start = m.end()
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        body = text[start:end].strip()
        if key is not None:
            current_key = key
            buffer.setdefault(key, [])
            if key == "title":
                inline = title_text.split(":", 1)[1].strip() if ":" in title_text else ""
                if inline:
                    buffer[key].append(inline)
            if body:
                buffer[key].append(body)
        elif current_key is not None:
            # unknown heading: preserved inside the nearest known section
            buffer[current_key].append(m.group(0).strip() + "\n" + body if body else m.group(0).strip())

    for canon, key in _KNOWN.items():
        if key not in buffer:
            raise SchemaViolation(f"missing report section: {canon!r}")
    sections = {k: "\n\n".join(v).strip() for k, v in buffer.items()}

    gaps = [
        re.sub(r"^[-*•]\s*", "", line).strip()
        for line in sections.get("gaps", "").splitlines()
        if line.strip() and not line.strip().startswith("#")
    ]
    report = Report(
        title=sections.get("title", ""),
        summary=sections.get("summary", ""),
        legal_reasoning=sections.get("legal_reasoning", ""),
        preliminary_answer=sections.get("preliminary_answer", ""),
        gaps_and_questions=gaps,
        sources=_parse_sources(sections.get("sources", "")),
    )
    return report


def validate_report(report: Report, allow_empty_gaps: bool = False) -> None:
    """Enforce the structural invariants; raises SchemaViolation."""
    for name in ("title", "summary", "legal_reasoning", "preliminary_answer"):
        if not getattr(report, name).strip():
            raise SchemaViolation(f"empty report section: {name}")
    if not report.gaps_and_questions and not allow_empty_gaps:
        raise SchemaViolation("empty gaps/questions list")
    if not report.sources:
        raise SchemaViolation("empty sources list")
    numbers = [s.number for s in report.sources]
    if numbers != list(range(1, len(numbers) + 1)):
        raise SchemaViolation(f"source numbers not consecutive from 1: {numbers}")
    valid = set(numbers)
    cited_text = "\n".join(
        [report.summary, report.legal_reasoning, report.preliminary_answer]
        + report.gaps_and_questions
    )
    for m in _CITATION_RE.finditer(cited_text):
        if int(m.group(1)) not in valid:
            raise SchemaViolation(f"citation [{m.group(1)}] has no matching source")


def render_report_markdown(report: Report, with_disclaimer: bool = True) -> str:
    lines = [f"{TITLE_HEADING}: {report.title}", ""]
    lines += [f"{SECTION_HEADINGS[0]}:", report.summary, ""]
    lines += [f"{SECTION_HEADINGS[1]}:", report.legal_reasoning, ""]
    lines += [f"{SECTION_HEADINGS[2]}:", report.preliminary_answer, ""]
    lines += [f"{SECTION_HEADINGS[3]}:"]
    lines += [f"- {g}" for g in report.gaps_and_questions] or ["- None identified."]
    lines += ["", f"{SECTION_HEADINGS[4]}:"]
    for s in report.sources:
        parts = [f'{s.number}. "{s.quote}"' if s.quote else f"{s.number}."]
        if s.locator:
            parts.append(s.locator)
        if s.filename:
            parts.append(s.filename)
        lines.append(" — ".join(parts))
    if with_disclaimer:
        lines += ["", DISCLAIMER]
    return "\n".join(lines).strip() + "\n"


NLI_LABELS = ("ENTAILMENT", "CONTRADICTION", "NEUTRAL")
_LABEL_RE = re.compile(r"\b(ENTAILMENT|CONTRADICTION|NEUTRAL)\b")
_EMPH_LABEL_RE = re.compile(
    r"(\*\*|__|\\textbf\{)\s*(ENTAILMENT|CONTRADICTION|NEUTRAL)\s*(\*\*|__|\})"
)


def extract_nli_label(report: Report) -> str:
    """Pick the verdict label from the preliminary answer (falling back to
    the reasoning section): an emphasized label wins, else the last
    standalone occurrence; UNKNOWN when no label token appears."""
    for text in (report.preliminary_answer, report.legal_reasoning):
        emphasized = _EMPH_LABEL_RE.findall(text)
        if emphasized:
            return emphasized[-1][1]
        plain = _LABEL_RE.findall(text)
        if plain:
            return plain[-1]
    return "UNKNOWN"
