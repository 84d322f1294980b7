"""Shared fixtures: tree builders, scripted gateways, and a random project
generator used by the persistence and acceptance suites."""

from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT / "tools"))

from sprout.engine import AgentEngine
from sprout.gateway import MockGateway, MockRule, MockScript
from sprout.model import (
    ActionType,
    AgentStep,
    AnchorStatus,
    CodeRange,
    NodeOrigin,
    SourceDocument,
    TextCodeAnchor,
    Thought,
    ThoughtNode,
    ThoughtStub,
    path_to,
)
from sprout.store import Project

FIXTURES = REPO_ROOT / "fixtures"
CORPORA = REPO_ROOT / "corpora"


def make_source(text: str = "alpha = 1\nbeta = 2\ngamma = 3\n", language: str = "python") -> SourceDocument:
    return SourceDocument(language_tag=language, text=text)


def make_anchor(
    rng: CodeRange | None = None,
    quoted: str | None = None,
    status: AnchorStatus | None = None,
    explanation: str = "an explanation",
    summary: str = "a brief",
) -> TextCodeAnchor:
    if status is None:
        status = AnchorStatus.RESOLVED if rng is not None else AnchorStatus.NO_CODE
    if quoted is None:
        quoted = "quoted code" if status is not AnchorStatus.NO_CODE else ""
    return TextCodeAnchor(
        step_number=1,
        quoted_code=quoted,
        resolved=rng,
        status=status,
        explanation=explanation,
        summary=summary,
    )


def add_node(
    project: Project,
    parent: str,
    action: ActionType = ActionType.WRITE_BACKGROUND,
    paragraph: str = "a paragraph",
    brief: str = "a brief",
    anchor: TextCodeAnchor | None = None,
    origin: NodeOrigin = NodeOrigin.AGENT,
    votes: int = 0,
    reason: str = "because",
) -> str:
    if action is ActionType.WRITE_CODE_EXPLANATION and anchor is None:
        anchor = make_anchor(CodeRange(1, 1), quoted="alpha = 1")
    node_id, seq = project.allocate_node()
    project.tree.attach(
        ThoughtNode(
            id=node_id,
            parent=parent,
            action=action,
            paragraph=paragraph,
            brief=brief,
            anchor=anchor,
            incoming_votes=votes,
            incoming_reason=reason,
            origin=origin,
            seq=seq,
        )
    )
    return node_id


def add_stub(
    project: Project,
    parent: str,
    action: ActionType = ActionType.WRITE_NOTIFICATION,
    rationale: str = "maybe later",
    target: CodeRange | None = None,
    votes: int = 0,
) -> str:
    stub_id, seq = project.allocate_node()
    project.tree.attach_stub(
        ThoughtStub(
            id=stub_id,
            parent=parent,
            action=action,
            rationale=rationale,
            target=target,
            votes=votes,
            seq=seq,
        )
    )
    return stub_id


@pytest.fixture
def project() -> Project:
    return Project(id="test", seed=1, source=make_source())


def scripted_engine(rules: list[tuple, ...], default: str = "VOTE: 1", seed: int = 0) -> AgentEngine:
    script = MockScript(
        rules=tuple(
            MockRule(match=(m,) if isinstance(m, str) else tuple(m), response=r)
            for m, r in rules
        ),
        default_response=default,
        seed=seed,
    )
    return AgentEngine(MockGateway(script), seed=seed)


# ---------------------------------------------------------------------------
# Random project generator (persistence + acceptance suites)
# ---------------------------------------------------------------------------

_WORDS = (
    "loop", "queue", "stack", "index", "parser", "branch", "anchor", "token",
    "buffer", "cursor", "window", "record", "symbol", "helper", "detail",
)


def _sentence(rng: random.Random, n: int) -> str:
    return " ".join(rng.choice(_WORDS) for _ in range(n)) + "."


def random_project(rng: random.Random, node_count: int = 12) -> Project:
    lines = [f"line_{i:03d} = {rng.randrange(1000)}" for i in range(rng.randint(4, 30))]
    source = SourceDocument(language_tag="python", text="\n".join(lines) + "\n")
    project = Project(id=f"rand-{rng.randrange(10**9):09d}", seed=rng.randrange(2**31), source=source)

    ids = [project.tree.root]
    for _ in range(node_count):
        parent = rng.choice(ids)
        action = rng.choice(list(ActionType))
        if action is ActionType.FINISH:
            action = ActionType.WRITE_SUMMARY
        anchor = None
        if action is ActionType.WRITE_CODE_EXPLANATION:
            flavor = rng.random()
            if flavor < 0.6:
                start = rng.randint(1, source.line_count)
                end = rng.randint(start, source.line_count)
                resolved = CodeRange(start, end)
                anchor = TextCodeAnchor(
                    step_number=rng.randint(1, 9),
                    quoted_code=source.slice(resolved),
                    resolved=resolved,
                    status=AnchorStatus.RESOLVED,
                    explanation=_sentence(rng, 8),
                    summary=_sentence(rng, 3),
                    ambiguous=rng.random() < 0.2,
                )
            elif flavor < 0.8:
                anchor = TextCodeAnchor(
                    step_number=rng.randint(1, 9),
                    quoted_code="",
                    resolved=None,
                    status=AnchorStatus.NO_CODE,
                    explanation=_sentence(rng, 8),
                    summary=_sentence(rng, 3),
                )
            else:
                anchor = TextCodeAnchor(
                    step_number=rng.randint(1, 9),
                    quoted_code="ghost_call()  # nowhere",
                    resolved=None,
                    status=AnchorStatus.CONTENT_MISMATCH,
                    explanation=_sentence(rng, 8),
                    summary=_sentence(rng, 3),
                )
        ids.append(
            add_node(
                project,
                parent,
                action=action,
                paragraph=_sentence(rng, rng.randint(6, 14)),
                brief=_sentence(rng, 3),
                anchor=anchor,
                origin=rng.choice(list(NodeOrigin)),
                votes=rng.randint(0, 5),
                reason=_sentence(rng, 4),
            )
        )

    for _ in range(rng.randint(0, 4)):
        parent = rng.choice(ids)
        action = rng.choice([a for a in ActionType if a is not ActionType.FINISH])
        target = None
        if action is ActionType.WRITE_CODE_EXPLANATION:
            start = rng.randint(1, source.line_count)
            target = CodeRange(start, rng.randint(start, source.line_count))
        add_stub(project, parent, action=action, rationale=_sentence(rng, 4),
                 target=target, votes=rng.randint(0, 3))

    project.active_chain = path_to(project.tree, rng.choice(ids))

    for index in range(rng.randint(0, 3)):
        thoughts = []
        for _ in range(rng.randint(1, 3)):
            taction = rng.choice([ActionType.WRITE_BACKGROUND, ActionType.WRITE_SUMMARY])
            thoughts.append(Thought(action=taction, rationale=_sentence(rng, 3), votes=rng.randint(0, 3)))
        chosen = rng.randrange(len(thoughts))
        produced = rng.choice(ids[1:]) if len(ids) > 1 else None
        if produced is None:
            continue
        project.steps.append(
            AgentStep(
                step_index=index + 1,
                observation=_sentence(rng, 5),
                thoughts=tuple(thoughts),
                chosen_index=chosen,
                produced_node=produced,
            )
        )

    for _ in range(rng.randint(0, 3)):
        key = f"{rng.randrange(16**8):08x}"
        project.embedding_cache[key] = [rng.uniform(-1, 1) for _ in range(8)]

    project.config = {"refine": {"styles": ["formal", "concise-technical"]}}
    return project
