"""Command-line entry point: serve, generate, export, eval, replay.

Every subcommand runs fully offline when ``--mock SCRIPT`` is supplied; with
a fixed seed and script, ``generate`` is byte-reproducible and ``replay``
re-prints exactly the event log the run produced.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .engine import AgentEngine, GenerationBudget
from .errors import SproutError
from .evalharness import (
    format_report,
    load_corpus,
    render_report_figure,
    run_pipeline_eval,
)
from .events import EventKind
from .gateway import Gateway, MockGateway, MockScript, RemoteGateway
from .model import SourceDocument
from .prompts import load_templates
from .store import Project, anchor_to_dict, load, node_to_dict, save
from . import service


def _gateway(mock_path: str | None, seed: int = 0) -> Gateway:
    if mock_path:
        return MockGateway(MockScript.from_file(mock_path))
    return RemoteGateway()


def _event_line(seq: int, kind: str, payload: dict) -> str:
    return f"{seq} {kind} {json.dumps(payload, sort_keys=True)}"


def _deterministic_project_id(seed: int, language: str, text: str) -> str:
    digest = hashlib.sha1(f"{seed}:{language}:{text}".encode("utf-8")).hexdigest()
    return f"gen-{digest[:12]}"


def cmd_generate(args) -> int:
    text = Path(args.source).read_text(encoding="utf-8")
    source = SourceDocument(language_tag=args.lang, text=text)
    gateway = _gateway(args.mock, args.seed)
    templates = load_templates(args.templates)
    project = Project(
        id=_deterministic_project_id(args.seed, args.lang, text),
        seed=args.seed,
        source=source,
    )
    engine = AgentEngine(gateway, templates=templates, seed=args.seed)
    budget = GenerationBudget(
        max_steps=args.max_steps,
        candidates_per_step=args.candidates,
        votes_per_step=args.votes,
    )
    counter = {"seq": 0}

    def printer(kind: str, payload: dict) -> None:
        counter["seq"] += 1
        print(_event_line(counter["seq"], kind, payload))

    engine.run_autopilot(project, budget, events=printer)
    save(project, args.out)
    return 0


def events_from_steps(project: Project) -> list[tuple[str, dict]]:
    """Reconstruct the autopilot event log from the recorded steps. Matches
    the live log of the run that filled ``project.steps``."""
    events: list[tuple[str, dict]] = []
    finished = False
    for step in project.steps:
        i = step.step_index
        events.append((EventKind.STEP_STARTED.value, {"step_index": i}))
        events.append((EventKind.OBSERVATION.value, {"step_index": i, "text": step.observation}))
        events.append(
            (
                EventKind.THOUGHTS_PROPOSED.value,
                {
                    "step_index": i,
                    "thoughts": [
                        {
                            "action": t.action.value,
                            "rationale": t.rationale,
                            "target": (
                                {
                                    "start_line": t.target.start_line,
                                    "end_line": t.target.end_line,
                                }
                                if t.target is not None
                                else None
                            ),
                        }
                        for t in step.thoughts
                    ],
                },
            )
        )
        events.append(
            (
                EventKind.VOTES.value,
                {
                    "step_index": i,
                    "votes": [t.votes for t in step.thoughts],
                    "chosen_index": step.chosen_index,
                },
            )
        )
        if step.produced_node is None:
            events.append((EventKind.FINISHED.value, {"reason": "finish"}))
            finished = True
        else:
            node = project.tree.node(step.produced_node)
            events.append(
                (EventKind.NODE_CREATED.value, {"step_index": i, "node": node_to_dict(node)})
            )
            if node.anchor is not None:
                events.append(
                    (
                        EventKind.ANCHOR_RESOLVED.value,
                        {
                            "step_index": i,
                            "node_id": node.id,
                            "anchor": anchor_to_dict(node.anchor),
                        },
                    )
                )
    if not finished:
        events.append((EventKind.FINISHED.value, {"reason": "budget"}))
    return events


def cmd_replay(args) -> int:
    project = load(args.project)
    for seq, (kind, payload) in enumerate(events_from_steps(project), start=1):
        print(_event_line(seq, kind, payload))
    return 0


def cmd_export(args) -> int:
    from .store import export_markdown

    project = load(args.project)
    Path(args.out).write_text(export_markdown(project), encoding="utf-8")
    return 0


def cmd_eval(args) -> int:
    corpus = load_corpus(args.corpus)
    gateway = _gateway(args.mock, args.seed)
    templates = load_templates(args.templates)
    report = run_pipeline_eval(
        corpus, gateway, templates=templates, jobs=args.jobs, seed=args.seed
    )
    text = format_report(report)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        figure_path = args.figures or str(Path(args.out).with_suffix(".png"))
        render_report_figure(report, figure_path)
    else:
        print(text)
        if args.figures:
            render_report_figure(report, args.figures)
    return 0


def cmd_serve(args) -> int:
    gateway = _gateway(args.mock)
    templates = load_templates(args.templates)
    service.serve(gateway, bind=args.bind, templates=templates)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sprout",
        description="Step-by-step programming tutorial authoring engine.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--templates", default=None, help="prompt template override dir")
    p.add_argument("--mock", default=None, help="mock script for offline runs")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("generate", help="run autopilot over a source file")
    p.add_argument("--source", required=True)
    p.add_argument("--lang", required=True)
    p.add_argument("--out", required=True, help="project file to write (*.sprout.json)")
    p.add_argument("--mock", default=None)
    p.add_argument("--max-steps", type=int, default=8, dest="max_steps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--candidates", type=int, default=3)
    p.add_argument("--votes", type=int, default=3)
    p.add_argument("--templates", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("export", help="export a project's active chain to Markdown")
    p.add_argument("--project", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("eval", help="run the connection-accuracy evaluation")
    p.add_argument("--corpus", required=True)
    p.add_argument("--mock", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--figures", default=None, help="figure output path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--templates", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("replay", help="re-print the recorded agent step log")
    p.add_argument("--project", required=True)
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SproutError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
