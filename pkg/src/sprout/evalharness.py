"""Desk-scale evaluation of text-code connection extraction.

Loads labeled corpora, scores predicted anchors against ground truth with
the three-category error breakdown, and runs the whole generation pipeline
over a corpus with any gateway (the bundled mocks make it offline and
deterministic).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .anchors import PredictionOutcome, classify_prediction
from .engine import AgentEngine, GenerationBudget
from .errors import GatewayError, LengthMismatch, SchemaError
from .gateway import Gateway
from .model import (
    ActionType,
    AnchorStatus,
    CodeRange,
    SourceDocument,
    TextCodeAnchor,
)
from .prompts import PromptTemplateSet
from .store import Project

ERROR_CATEGORIES = (
    PredictionOutcome.NO_CODE.value,
    PredictionOutcome.INCORRECT_CODE_RANGE.value,
    PredictionOutcome.INCORRECT_CODE_CONTENT.value,
)


@dataclass(frozen=True)
class LabeledParagraph:
    text: str
    truth: CodeRange | None


@dataclass(frozen=True)
class CorpusEntry:
    source: SourceDocument
    paragraphs: tuple[LabeledParagraph, ...]


@dataclass(frozen=True)
class LabeledCorpus:
    entries: tuple[CorpusEntry, ...]

    @property
    def paragraph_count(self) -> int:
        return sum(len(e.paragraphs) for e in self.entries)


@dataclass(frozen=True)
class EvalReport:
    total: int
    correct: int
    accuracy: float
    errors: dict[str, int] = field(default_factory=dict)
    skipped_entries: int = 0

    def __post_init__(self):
        errors = dict(self.errors)
        for key in ERROR_CATEGORIES:
            errors.setdefault(key, 0)
        object.__setattr__(self, "errors", errors)
        if self.correct + sum(errors.values()) != self.total:
            raise ValueError("correct + errors must equal total")
        expected = self.correct / self.total if self.total else 1.0
        if abs(self.accuracy - expected) > 1e-9:
            raise ValueError("accuracy must equal correct/total")

    @classmethod
    def tally(cls, outcomes, skipped_entries: int = 0) -> EvalReport:
        outcomes = list(outcomes)
        total = len(outcomes)
        correct = sum(1 for o in outcomes if o is PredictionOutcome.CORRECT)
        errors = {key: 0 for key in ERROR_CATEGORIES}
        for outcome in outcomes:
            if outcome is not PredictionOutcome.CORRECT:
                errors[outcome.value] += 1
        return cls(
            total=total,
            correct=correct,
            accuracy=correct / total if total else 1.0,
            errors=errors,
            skipped_entries=skipped_entries,
        )


def _entry_from_dict(data: dict, index: int) -> CorpusEntry:
    pointer = f"/entries/{index}"
    try:
        source = SourceDocument(
            language_tag=data["language"], text=data["source"]
        )
    except Exception as exc:
        raise SchemaError(pointer, str(exc)) from exc
    paragraphs = []
    for j, raw in enumerate(data.get("paragraphs", [])):
        ppointer = f"{pointer}/paragraphs/{j}"
        if "text" not in raw:
            raise SchemaError(ppointer, "missing text")
        truth_raw = raw.get("truth")
        truth = None
        if truth_raw is not None:
            try:
                truth = CodeRange(int(truth_raw["start"]), int(truth_raw["end"]))
            except Exception as exc:
                raise SchemaError(f"{ppointer}/truth", str(exc)) from exc
            if not truth.valid_in(source):
                raise SchemaError(f"{ppointer}/truth", "range outside source")
        paragraphs.append(LabeledParagraph(text=raw["text"], truth=truth))
    return CorpusEntry(source=source, paragraphs=tuple(paragraphs))


def load_corpus(path: str | Path) -> LabeledCorpus:
    """One JSON file per entry; a directory loads every ``*.json`` inside,
    sorted by name."""
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    entries = []
    for index, file in enumerate(files):
        try:
            data = json.loads(file.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"/entries/{index}", f"invalid JSON: {exc}") from exc
        entries.append(_entry_from_dict(data, index))
    return LabeledCorpus(entries=tuple(entries))


def evaluate(
    corpus: LabeledCorpus,
    predictions: list[TextCodeAnchor],
    skipped_entries: int = 0,
) -> EvalReport:
    """Score predictions aligned 1:1 with the corpus paragraphs, in entry
    order. An empty corpus scores 100% by convention."""
    paragraphs = [p for entry in corpus.entries for p in entry.paragraphs]
    if len(predictions) != len(paragraphs):
        raise LengthMismatch(
            f"{len(predictions)} predictions for {len(paragraphs)} paragraphs"
        )
    outcomes = [
        classify_prediction(pred, para.truth)
        for pred, para in zip(predictions, paragraphs)
    ]
    return EvalReport.tally(outcomes, skipped_entries=skipped_entries)


_SYNTHETIC_NO_CODE = TextCodeAnchor(
    step_number=0,
    quoted_code="",
    resolved=None,
    status=AnchorStatus.NO_CODE,
    explanation="(no generated paragraph aligned)",
    summary="unaligned",
)


def align_predictions(
    paragraphs: list[LabeledParagraph], generated: list[TextCodeAnchor]
) -> list[TextCodeAnchor]:
    """Greedy best-range-overlap alignment of generated anchors to corpus
    paragraphs; leftovers pair up in order, and paragraphs with nothing left
    score as NoCode predictions."""
    pairs = []
    for pi, pred in enumerate(generated):
        if pred.resolved is None:
            continue
        for ci, para in enumerate(paragraphs):
            if para.truth is None:
                continue
            shared = pred.resolved.overlap(para.truth)
            if shared > 0:
                pairs.append((-shared, ci, pi))
    pairs.sort()
    assigned: dict[int, int] = {}
    used: set[int] = set()
    for negshared, ci, pi in pairs:
        if ci in assigned or pi in used:
            continue
        assigned[ci] = pi
        used.add(pi)
    leftovers = [pi for pi in range(len(generated)) if pi not in used]
    result: list[TextCodeAnchor] = []
    cursor = 0
    for ci in range(len(paragraphs)):
        if ci in assigned:
            result.append(generated[assigned[ci]])
        elif cursor < len(leftovers):
            result.append(generated[leftovers[cursor]])
            cursor += 1
        else:
            result.append(_SYNTHETIC_NO_CODE)
    return result


def _generated_anchors(project: Project) -> list[TextCodeAnchor]:
    anchors = []
    for node_id in project.active_chain[1:]:
        node = project.tree.node(node_id)
        if node.action is ActionType.WRITE_CODE_EXPLANATION and node.anchor is not None:
            anchors.append(node.anchor)
    return anchors


def run_pipeline_eval(
    corpus: LabeledCorpus,
    gateway: Gateway,
    templates: PromptTemplateSet | None = None,
    jobs: int = 1,
    seed: int = 0,
) -> EvalReport:
    """Generate a tutorial per corpus source, align the explanation anchors
    to the labeled paragraphs, and score. Entries whose generation dies on a
    gateway error are skipped and counted in the report metadata."""
    engine = AgentEngine(gateway, templates=templates, seed=seed)

    def run_entry(args) -> list | None:
        index, entry = args
        project = Project(id=f"eval-{index}", seed=seed, source=entry.source)
        budget = GenerationBudget(
            max_steps=len(entry.paragraphs) + 4, candidates_per_step=3, votes_per_step=1
        )
        try:
            engine.run_autopilot(project, budget)
        except GatewayError:
            return None
        aligned = align_predictions(list(entry.paragraphs), _generated_anchors(project))
        return [
            classify_prediction(pred, para.truth)
            for pred, para in zip(aligned, entry.paragraphs)
        ]

    items = list(enumerate(corpus.entries))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_entry, items))
    else:
        results = [run_entry(item) for item in items]

    outcomes = []
    skipped = 0
    for result in results:  # aggregation stays in entry order
        if result is None:
            skipped += 1
        else:
            outcomes.extend(result)
    return EvalReport.tally(outcomes, skipped_entries=skipped)


def report_to_dict(report: EvalReport) -> dict:
    return {
        "total": report.total,
        "correct": report.correct,
        "accuracy": report.accuracy,
        "errors": dict(report.errors),
        "skipped_entries": report.skipped_entries,
    }


def report_from_json_line(line: str) -> EvalReport:
    data = json.loads(line)
    return EvalReport(
        total=data["total"],
        correct=data["correct"],
        accuracy=data["accuracy"],
        errors=data["errors"],
        skipped_entries=data.get("skipped_entries", 0),
    )


def format_report(report: EvalReport) -> str:
    """Human-readable block plus one machine-readable JSON line."""
    lines = []
    if report.total == 0:
        lines.append("text-code connection accuracy 100.0% (0 paragraphs)")
    else:
        lines.append(
            f"text-code connection accuracy {report.accuracy * 100:.1f}% "
            f"({report.correct}/{report.total} correct)"
        )
    lines.append("errors by category:")
    for key in ERROR_CATEGORIES:
        lines.append(f"  {key:<22} {report.errors[key]:>4}")
    if report.skipped_entries:
        lines.append(f"  (skipped entries: {report.skipped_entries})")
    lines.append(json.dumps(report_to_dict(report), sort_keys=True))
    return "\n".join(lines)


def render_report_figure(report: EvalReport, path: str | Path) -> None:
    """Bar chart of the outcome breakdown, written next to the report."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = ["Correct", *ERROR_CATEGORIES]
    values = [report.correct] + [report.errors[k] for k in ERROR_CATEGORIES]
    fig, ax = plt.subplots(figsize=(7, 4))
    bars = ax.bar(labels, values, color=["#4c9f70", "#c8553d", "#e0a458", "#937acd"])
    ax.bar_label(bars)
    ax.set_ylabel("paragraphs")
    pct = report.accuracy * 100
    ax.set_title(f"Text-code connection accuracy: {pct:.1f}% (n={report.total})")
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
