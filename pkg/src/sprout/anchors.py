"""Parsing of structured writing responses and resolution of quoted code to
source line ranges by string matching.

Resolution is two-pass: exact substring search first, then a
whitespace-normalized line-sequence comparison that survives the usual
indentation loss in model output. Failures are classified into the
error taxonomy used by the evaluation harness.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import MissingField
from .model import AnchorStatus, CodeRange, SourceDocument, TextCodeAnchor

SUMMARY_MAX_WORDS = 12

_LABEL_RE = re.compile(r"^(STEP|CODE|EXPLANATION|SUMMARY)\s*:\s?(.*)$")
_FENCE_RE = re.compile(r"^\s*```")


class Exactness(str, Enum):
    EXACT = "Exact"
    WHITESPACE_NORMALIZED = "WhitespaceNormalized"


class PredictionOutcome(str, Enum):
    CORRECT = "Correct"
    NO_CODE = "NoCode"
    INCORRECT_CODE_RANGE = "IncorrectCodeRange"
    INCORRECT_CODE_CONTENT = "IncorrectCodeContent"


@dataclass(frozen=True)
class ParsedWriteResponse:
    step_number: int
    quoted_code: str
    explanation: str
    summary: str


@dataclass(frozen=True)
class MatchCandidate:
    range: CodeRange
    exactness: Exactness


def truncate_summary(text: str) -> str:
    words = text.split()
    return " ".join(words[:SUMMARY_MAX_WORDS])


def parse_write_response(raw: str) -> ParsedWriteResponse:
    """Extract the labeled fields from a structured writing response.

    ``quoted_code`` comes verbatim from the fenced CODE block, internal
    newlines included; no CODE block means an empty quote. A missing or
    blank EXPLANATION or SUMMARY raises MissingField.
    """
    lines = raw.splitlines()
    step_number = 0
    quoted_code = ""
    sections: dict[str, list[str]] = {}
    current: str | None = None
    i = 0
    while i < len(lines):
        match = _LABEL_RE.match(lines[i])
        if match is None:
            if current is not None:
                sections[current].append(lines[i])
            i += 1
            continue
        label, rest = match.group(1), match.group(2)
        if label == "STEP":
            current = None
            number = re.search(r"\d+", rest)
            if number:
                step_number = int(number.group())
        elif label == "CODE":
            current = None
            fence_at = None
            if _FENCE_RE.match(rest):
                fence_at = i  # fence opened right after the label
            elif not rest.strip() and i + 1 < len(lines) and _FENCE_RE.match(lines[i + 1]):
                fence_at = i + 1
            if fence_at is not None:
                body: list[str] = []
                j = fence_at + 1
                while j < len(lines) and not _FENCE_RE.match(lines[j]):
                    body.append(lines[j])
                    j += 1
                quoted_code = "\n".join(body)
                i = j  # lands on the closing fence (or EOF)
            elif rest.strip():
                quoted_code = rest  # unfenced single-line quote
        else:
            current = label
            sections[label] = [rest] if rest else []
        i += 1

    explanation = "\n".join(sections.get("EXPLANATION", [])).strip()
    summary = " ".join("\n".join(sections.get("SUMMARY", [])).split())
    if not explanation:
        raise MissingField("explanation")
    if not summary:
        raise MissingField("summary")
    return ParsedWriteResponse(
        step_number=step_number,
        quoted_code=quoted_code,
        explanation=explanation,
        summary=truncate_summary(summary),
    )


def _normalize(line: str) -> str:
    # trim + collapse internal whitespace runs to single spaces
    return " ".join(line.split())


def find_matches(quoted_code: str, source: SourceDocument) -> list[MatchCandidate]:
    """All plausible placements of the quoted code in the source.

    Pass 1: exact substring hits, mapped to the line ranges they span.
    Pass 2 (only when pass 1 is empty): whitespace-normalized line-sequence
    alignment; blank lines do not participate.
    """
    if not quoted_code.strip():
        return []

    text = source.text
    ranges: list[CodeRange] = []
    pos = text.find(quoted_code)
    while pos != -1:
        # Only whole-line hits count as exact; a quote that starts or ends
        # mid-line (stripped indentation, partial lines) goes to pass 2.
        end = pos + len(quoted_code)
        starts_line = pos == 0 or text[pos - 1] == "\n"
        ends_line = (
            end == len(text) or text[end] == "\n" or quoted_code.endswith("\n")
        )
        if starts_line and ends_line:
            start_line = text.count("\n", 0, pos) + 1
            end_line = text.count("\n", 0, end - 1) + 1
            rng = CodeRange(start_line, min(end_line, source.line_count))
            if rng not in ranges:
                ranges.append(rng)
        pos = text.find(quoted_code, pos + 1)
    if ranges:
        ranges.sort()
        return [MatchCandidate(r, Exactness.EXACT) for r in ranges]

    quoted_lines = [_normalize(l) for l in quoted_code.splitlines()]
    quoted_lines = [l for l in quoted_lines if l]
    if not quoted_lines:
        return []
    source_lines = [
        (idx + 1, norm)
        for idx, line in enumerate(source.lines())
        if (norm := _normalize(line))
    ]
    hits: list[CodeRange] = []
    span = len(quoted_lines)
    for start in range(len(source_lines) - span + 1):
        if all(source_lines[start + j][1] == quoted_lines[j] for j in range(span)):
            rng = CodeRange(source_lines[start][0], source_lines[start + span - 1][0])
            if rng not in hits:
                hits.append(rng)
    hits.sort()
    return [MatchCandidate(r, Exactness.WHITESPACE_NORMALIZED) for r in hits]


def resolve_anchor(
    parsed: ParsedWriteResponse,
    source: SourceDocument,
    previous: CodeRange | None = None,
) -> TextCodeAnchor:
    """Link a parsed response to the source.

    An empty quote is NoCode; an unplaceable quote is ContentMismatch.
    Among several placements the one nearest the previous anchor wins
    (tutorials walk the code top to bottom), earliest on ties, and the
    anchor is flagged ambiguous for review.
    """
    if not parsed.quoted_code.strip():
        return TextCodeAnchor(
            step_number=parsed.step_number,
            quoted_code="",
            resolved=None,
            status=AnchorStatus.NO_CODE,
            explanation=parsed.explanation,
            summary=parsed.summary,
        )
    candidates = find_matches(parsed.quoted_code, source)
    if not candidates:
        return TextCodeAnchor(
            step_number=parsed.step_number,
            quoted_code=parsed.quoted_code,
            resolved=None,
            status=AnchorStatus.CONTENT_MISMATCH,
            explanation=parsed.explanation,
            summary=parsed.summary,
        )
    if len(candidates) == 1:
        chosen = candidates[0].range
        ambiguous = False
    elif previous is not None:
        chosen = min(
            (c.range for c in candidates),
            key=lambda r: (abs(r.start_line - previous.end_line), r.start_line),
        )
        ambiguous = True
    else:
        chosen = min(c.range for c in candidates)
        ambiguous = True
    return TextCodeAnchor(
        step_number=parsed.step_number,
        quoted_code=parsed.quoted_code,
        resolved=chosen,
        status=AnchorStatus.RESOLVED,
        explanation=parsed.explanation,
        summary=parsed.summary,
        ambiguous=ambiguous,
    )


def classify_prediction(
    predicted: TextCodeAnchor, truth: CodeRange | None
) -> PredictionOutcome:
    """Score one prediction against labeled truth.

    ``truth`` of None means the paragraph genuinely references no code, so a
    NoCode prediction is correct there. Partial range overlap earns no
    credit: an over-wide or shifted range is still an incorrect range.
    """
    if predicted.status is AnchorStatus.NO_CODE:
        return PredictionOutcome.CORRECT if truth is None else PredictionOutcome.NO_CODE
    if predicted.status in (AnchorStatus.CONTENT_MISMATCH, AnchorStatus.AMBIGUOUS):
        return PredictionOutcome.INCORRECT_CODE_CONTENT
    if truth is not None and predicted.resolved == truth:
        return PredictionOutcome.CORRECT
    return PredictionOutcome.INCORRECT_CODE_RANGE
