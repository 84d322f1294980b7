"""Project persistence and tutorial export.

A project is one JSON document (``*.sprout.json``) with stable key ordering,
so identical projects always serialize to identical bytes. Loading
re-validates every invariant and reports the offending pointer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .errors import InvalidArgument, SchemaError
from .model import (
    ROOT_ID,
    ActionType,
    AgentStep,
    AnchorStatus,
    Chain,
    CodeRange,
    NodeOrigin,
    SourceDocument,
    TextCodeAnchor,
    Thought,
    ThoughtNode,
    ThoughtStub,
    ThoughtTree,
    chain_is_valid,
    validate_tree,
)

SCHEMA_VERSION = 1
PROJECT_SUFFIX = ".sprout.json"

EventSink = Callable[[str, dict], None]


@dataclass
class Project:
    """Everything one tutorial-in-progress needs: the source, the tree, the
    active chain, the recorded agent steps and the embedding cache."""

    id: str
    seed: int = 0
    source: SourceDocument | None = None
    tree: ThoughtTree = field(default_factory=ThoughtTree.empty)
    active_chain: Chain = field(default_factory=lambda: [ROOT_ID])
    steps: list[AgentStep] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    embedding_cache: dict[str, list[float]] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION
    next_id: int = 1
    # runtime-only: the service wires this to its event broadcaster
    event_sink: EventSink | None = field(default=None, repr=False, compare=False)

    def allocate_node(self) -> tuple[str, int]:
        """A fresh (id, creation seq). Ids are never reused, even after trim."""
        seq = self.next_id
        self.next_id += 1
        return f"n{seq}", seq

    def emit(self, kind: str, payload: dict) -> None:
        if self.event_sink is not None:
            self.event_sink(kind, payload)

    def require_source(self) -> SourceDocument:
        if self.source is None:
            raise InvalidArgument("project has no source document")
        return self.source


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def range_to_dict(rng: CodeRange | None) -> dict | None:
    if rng is None:
        return None
    return {"start_line": rng.start_line, "end_line": rng.end_line}


def anchor_to_dict(anchor: TextCodeAnchor | None) -> dict | None:
    if anchor is None:
        return None
    return {
        "step_number": anchor.step_number,
        "quoted_code": anchor.quoted_code,
        "resolved": range_to_dict(anchor.resolved),
        "status": anchor.status.value,
        "explanation": anchor.explanation,
        "summary": anchor.summary,
        "ambiguous": anchor.ambiguous,
    }


def node_to_dict(node: ThoughtNode) -> dict:
    return {
        "id": node.id,
        "parent": node.parent,
        "action": node.action.value if node.action is not None else None,
        "paragraph": node.paragraph,
        "brief": node.brief,
        "anchor": anchor_to_dict(node.anchor),
        "incoming_votes": node.incoming_votes,
        "incoming_reason": node.incoming_reason,
        "origin": node.origin.value,
        "seq": node.seq,
    }


def stub_to_dict(stub: ThoughtStub) -> dict:
    return {
        "id": stub.id,
        "parent": stub.parent,
        "action": stub.action.value,
        "rationale": stub.rationale,
        "target": range_to_dict(stub.target),
        "votes": stub.votes,
        "seq": stub.seq,
    }


def thought_to_dict(thought: Thought) -> dict:
    return {
        "action": thought.action.value,
        "rationale": thought.rationale,
        "target": range_to_dict(thought.target),
        "votes": thought.votes,
    }


def step_to_dict(step: AgentStep) -> dict:
    return {
        "step_index": step.step_index,
        "observation": step.observation,
        "thoughts": [thought_to_dict(t) for t in step.thoughts],
        "chosen_index": step.chosen_index,
        "produced_node": step.produced_node,
    }


def project_to_dict(project: Project) -> dict:
    return {
        "schema_version": project.schema_version,
        "id": project.id,
        "seed": project.seed,
        "source": (
            None
            if project.source is None
            else {"language": project.source.language_tag, "text": project.source.text}
        ),
        "tree": {
            "root": project.tree.root,
            "nodes": {nid: node_to_dict(n) for nid, n in project.tree.nodes.items()},
            "stubs": {sid: stub_to_dict(s) for sid, s in project.tree.stubs.items()},
        },
        "active_chain": list(project.active_chain),
        "steps": [step_to_dict(s) for s in project.steps],
        "config": project.config,
        "embedding_cache": {k: list(v) for k, v in project.embedding_cache.items()},
        "next_id": project.next_id,
    }


def _expect(data: dict, key: str, kind, pointer: str):
    if key not in data:
        raise SchemaError(f"{pointer}/{key}", "missing")
    value = data[key]
    if kind is not None and not isinstance(value, kind):
        raise SchemaError(f"{pointer}/{key}", f"expected {kind}")
    return value


def range_from_dict(data: dict | None, pointer: str) -> CodeRange | None:
    if data is None:
        return None
    try:
        return CodeRange(
            int(_expect(data, "start_line", int, pointer)),
            int(_expect(data, "end_line", int, pointer)),
        )
    except InvalidArgument as exc:
        raise SchemaError(pointer, str(exc)) from exc


def anchor_from_dict(data: dict | None, pointer: str) -> TextCodeAnchor | None:
    if data is None:
        return None
    try:
        return TextCodeAnchor(
            step_number=int(_expect(data, "step_number", int, pointer)),
            quoted_code=_expect(data, "quoted_code", str, pointer),
            resolved=range_from_dict(data.get("resolved"), f"{pointer}/resolved"),
            status=AnchorStatus(_expect(data, "status", str, pointer)),
            explanation=_expect(data, "explanation", str, pointer),
            summary=_expect(data, "summary", str, pointer),
            ambiguous=bool(data.get("ambiguous", False)),
        )
    except (InvalidArgument, ValueError) as exc:
        raise SchemaError(pointer, str(exc)) from exc


def node_from_dict(data: dict, pointer: str) -> ThoughtNode:
    try:
        action_raw = data.get("action")
        return ThoughtNode(
            id=_expect(data, "id", str, pointer),
            parent=data.get("parent"),
            action=ActionType(action_raw) if action_raw is not None else None,
            paragraph=_expect(data, "paragraph", str, pointer),
            brief=_expect(data, "brief", str, pointer),
            anchor=anchor_from_dict(data.get("anchor"), f"{pointer}/anchor"),
            incoming_votes=int(data.get("incoming_votes", 0)),
            incoming_reason=data.get("incoming_reason", ""),
            origin=NodeOrigin(data.get("origin", "Agent")),
            seq=int(data.get("seq", 0)),
        )
    except (InvalidArgument, ValueError) as exc:
        raise SchemaError(pointer, str(exc)) from exc


def stub_from_dict(data: dict, pointer: str) -> ThoughtStub:
    try:
        return ThoughtStub(
            id=_expect(data, "id", str, pointer),
            parent=_expect(data, "parent", str, pointer),
            action=ActionType(_expect(data, "action", str, pointer)),
            rationale=data.get("rationale", ""),
            target=range_from_dict(data.get("target"), f"{pointer}/target"),
            votes=int(data.get("votes", 0)),
            seq=int(data.get("seq", 0)),
        )
    except (InvalidArgument, ValueError) as exc:
        raise SchemaError(pointer, str(exc)) from exc


def thought_from_dict(data: dict, pointer: str) -> Thought:
    try:
        return Thought(
            action=ActionType(_expect(data, "action", str, pointer)),
            rationale=data.get("rationale", ""),
            target=range_from_dict(data.get("target"), f"{pointer}/target"),
            votes=int(data.get("votes", 0)),
        )
    except (InvalidArgument, ValueError) as exc:
        raise SchemaError(pointer, str(exc)) from exc


def step_from_dict(data: dict, pointer: str) -> AgentStep:
    thoughts = tuple(
        thought_from_dict(t, f"{pointer}/thoughts/{i}")
        for i, t in enumerate(_expect(data, "thoughts", list, pointer))
    )
    try:
        return AgentStep(
            step_index=int(_expect(data, "step_index", int, pointer)),
            observation=data.get("observation", ""),
            thoughts=thoughts,
            chosen_index=int(_expect(data, "chosen_index", int, pointer)),
            produced_node=data.get("produced_node"),
        )
    except (InvalidArgument, ValueError) as exc:
        raise SchemaError(pointer, str(exc)) from exc


def project_from_dict(data: dict) -> Project:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError("version", f"unsupported schema_version {version!r}")

    source = None
    source_raw = data.get("source")
    if source_raw is not None:
        try:
            source = SourceDocument(
                language_tag=_expect(source_raw, "language", str, "/source"),
                text=_expect(source_raw, "text", str, "/source"),
            )
        except InvalidArgument as exc:
            raise SchemaError("/source", str(exc)) from exc

    tree_raw = _expect(data, "tree", dict, "")
    tree = ThoughtTree(root=_expect(tree_raw, "root", str, "/tree"))
    for nid, raw in _expect(tree_raw, "nodes", dict, "/tree").items():
        tree.nodes[nid] = node_from_dict(raw, f"/tree/nodes/{nid}")
    for sid, raw in tree_raw.get("stubs", {}).items():
        tree.stubs[sid] = stub_from_dict(raw, f"/tree/stubs/{sid}")

    violations = validate_tree(tree)
    if violations:
        raise SchemaError("/tree", "; ".join(violations))

    chain = _expect(data, "active_chain", list, "")
    if not chain_is_valid(tree, chain):
        raise SchemaError("/active_chain", "not a root-to-node path")

    steps = [
        step_from_dict(raw, f"/steps/{i}")
        for i, raw in enumerate(data.get("steps", []))
    ]

    if source is not None:
        for nid, node in tree.nodes.items():
            if node.anchor is not None and node.anchor.resolved is not None:
                if not node.anchor.resolved.valid_in(source):
                    raise SchemaError(f"/tree/nodes/{nid}/anchor", "range outside source")

    embedding_cache = {
        str(k): [float(x) for x in v]
        for k, v in data.get("embedding_cache", {}).items()
    }

    return Project(
        id=_expect(data, "id", str, ""),
        seed=int(data.get("seed", 0)),
        source=source,
        tree=tree,
        active_chain=[str(x) for x in chain],
        steps=steps,
        config=data.get("config", {}),
        embedding_cache=embedding_cache,
        next_id=int(data.get("next_id", 1)),
    )


def dumps(project: Project) -> str:
    """Canonical serialization: stable key order, two-space indent, one
    trailing newline. Equal projects produce equal bytes."""
    return json.dumps(project_to_dict(project), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def save(project: Project, path: str | Path) -> None:
    Path(path).write_text(dumps(project), encoding="utf-8")


def load(path: str | Path) -> Project:
    with open(path, encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise SchemaError("", f"not valid JSON: {exc}") from exc
    return project_from_dict(data)


# ---------------------------------------------------------------------------
# Markdown export
# ---------------------------------------------------------------------------


def export_markdown(project: Project) -> str:
    """Render the active chain as CommonMark.

    The first WriteTitle paragraph becomes the H1; every other node emits an
    H2 brief, then (when anchored to a resolved range) a ``<!-- lines A-B -->``
    comment and a fenced, byte-exact slice of the source, then the paragraph.
    """
    tree = project.tree
    body_ids = [nid for nid in project.active_chain[1:]]
    title = "Untitled Tutorial"
    title_node_id = None
    # Only a leading title becomes the H1; a title node elsewhere renders in
    # place so paragraphs keep their chain order.
    if body_ids and tree.node(body_ids[0]).action is ActionType.WRITE_TITLE:
        title_node_id = body_ids[0]
        title = tree.node(title_node_id).paragraph

    lines: list[str] = [f"# {title}"]
    language = project.source.language_tag if project.source is not None else ""
    for nid in body_ids:
        if nid == title_node_id:
            continue
        node = tree.node(nid)
        lines.append("")
        lines.append(f"## {node.brief}")
        anchor = node.anchor
        if anchor is not None and anchor.resolved is not None and project.source is not None:
            rng = anchor.resolved
            lines.append(f"<!-- lines {rng.start_line}-{rng.end_line} -->")
            lines.append(f"```{language}")
            lines.extend(project.source.slice(rng).splitlines())
            lines.append("```")
        lines.append(node.paragraph)
    return "\n".join(lines).rstrip("\n") + "\n"
