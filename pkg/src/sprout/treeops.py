"""Structural operations over the thought tree: group, split, trim, quick
assembling and step-by-step assembling.

Restructuring is copy-on-write: group and split build a new branch (with the
downstream chain duplicated under fresh ids) and never touch the original
nodes, so the old version stays reachable. Every LLM-backed operation is
transactional: any failure leaves the tree bit-identical.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .anchors import ParsedWriteResponse, parse_write_response, resolve_anchor
from .engine import AgentEngine, chain_changed_payload, last_resolved_range
from .errors import (
    InvalidArgument,
    ModelReturnedSingleParagraph,
    NonContiguousSelection,
    NotFound,
    RootSelected,
)
from .events import EventKind
from .model import (
    ActionType,
    AnchorStatus,
    Chain,
    CodeRange,
    NodeOrigin,
    TextCodeAnchor,
    Thought,
    ThoughtNode,
    path_to,
)
from .prompts import InterventionKind, build_intervention_prompt
from .store import Project

_STEP_BLOCK_RE = re.compile(r"(?=^\s*STEP\s*:)", re.MULTILINE)


@dataclass(frozen=True)
class BranchFork:
    """What a restructuring produced: the attachment point, the new nodes in
    chain order, and the copied downstream suffix."""

    fork_parent: str
    new_nodes: list[str]
    copied_suffix: list[str]


@dataclass(frozen=True)
class Choice:
    """One candidate continuation below a node: an existing child or an
    unexpanded thought stub."""

    id: str
    kind: str  # "node" | "stub"
    action: ActionType
    votes: int
    reason: str
    label: str
    seq: int


def copy_suffix(project: Project, suffix_ids: list[str], new_parent: str) -> list[str]:
    """Duplicate a chain of nodes beneath ``new_parent`` with fresh ids,
    content byte-identical."""
    copies: list[str] = []
    parent = new_parent
    for node_id in suffix_ids:
        original = project.tree.node(node_id)
        new_id, seq = project.allocate_node()
        project.tree.attach(replace(original, id=new_id, parent=parent, seq=seq))
        copies.append(new_id)
        parent = new_id
    return copies


def _active_suffix_below(project: Project, node_id: str) -> list[str]:
    """Active-chain nodes strictly below ``node_id``, or [] when the node is
    not on the active chain (no defined reading order elsewhere)."""
    chain = project.active_chain
    if node_id not in chain:
        return []
    return chain[chain.index(node_id) + 1 :]


def _node_code(project: Project, node: ThoughtNode) -> str:
    """The code a node talks about, best available form; falls back to the
    paragraph itself for codeless nodes so templates stay non-empty."""
    source = project.source
    if node.anchor is not None:
        if node.anchor.resolved is not None and source is not None:
            return source.slice(node.anchor.resolved)
        if node.anchor.quoted_code.strip():
            return node.anchor.quoted_code
    return node.paragraph


def _ordered_selection(project: Project, node_ids: list[str]) -> list[ThoughtNode]:
    """Validate a group selection: all on one chain, contiguous, non-root."""
    if len(node_ids) < 2:
        raise InvalidArgument("grouping needs at least two nodes")
    if len(set(node_ids)) != len(node_ids):
        raise NonContiguousSelection("duplicate node in selection")
    nodes = [project.tree.node(nid) for nid in node_ids]
    if any(n.is_root for n in nodes):
        raise RootSelected("cannot group the root")
    selected = set(node_ids)
    heads = [n for n in nodes if n.parent not in selected]
    if len(heads) != 1:
        raise NonContiguousSelection("selection does not form one contiguous run")
    ordered = [heads[0]]
    while len(ordered) < len(nodes):
        next_nodes = [n for n in nodes if n.parent == ordered[-1].id]
        if len(next_nodes) != 1:
            raise NonContiguousSelection("selection does not form one contiguous run")
        ordered.append(next_nodes[0])
    return ordered


def group_nodes(project: Project, node_ids: list[str], engine: AgentEngine) -> BranchFork:
    """Merge contiguous chain nodes into one paragraph on a new branch.

    The merged node lands as a sibling branch under the first selected
    node's parent; whatever followed the last selected node on the active
    chain is copied beneath it, so the new branch is a complete tutorial.
    """
    source = project.require_source()
    ordered = _ordered_selection(project, node_ids)
    first, last = ordered[0], ordered[-1]

    code_text = "\n".join(_node_code(project, n) for n in ordered)
    skeleton = build_intervention_prompt(
        InterventionKind.GROUP_ONE_PARAGRAPH, {"code": code_text}, engine.templates
    )
    paragraphs = "\n".join(f"{i + 1}. {n.paragraph}" for i, n in enumerate(ordered))
    instruction = (
        f"{skeleton}\n\nThe paragraphs to combine:\n{paragraphs}\n\n"
        "Merge them into a single coherent paragraph."
    )
    assert first.parent is not None
    base_chain = path_to(project.tree, first.parent)
    parsed: ParsedWriteResponse = engine.complete_write_prompt(
        source, project.tree, base_chain, instruction, parse_write_response
    )

    # All model work is done; mutations start here.
    explanations = [n for n in ordered if n.action is ActionType.WRITE_CODE_EXPLANATION]
    all_resolved = len(explanations) == len(ordered) and all(
        n.anchor is not None and n.anchor.resolved is not None for n in ordered
    )
    if all_resolved:
        union = CodeRange(
            min(n.anchor.resolved.start_line for n in ordered),
            max(n.anchor.resolved.end_line for n in ordered),
        )
        anchor = TextCodeAnchor(
            step_number=parsed.step_number,
            quoted_code=source.slice(union),
            resolved=union,
            status=AnchorStatus.RESOLVED,
            explanation=parsed.explanation,
            summary=parsed.summary,
        )
        action = ActionType.WRITE_CODE_EXPLANATION
    elif explanations:
        # Mixed anchor statuses: re-resolve from the model's quote and flag
        # the result for review.
        anchor = replace(
            resolve_anchor(parsed, source, previous=last_resolved_range(project.tree, base_chain)),
            ambiguous=True,
        )
        action = ActionType.WRITE_CODE_EXPLANATION
    else:
        anchor = None
        action = first.action if first.action is not None else ActionType.WRITE_BACKGROUND

    suffix_ids = _active_suffix_below(project, last.id)
    merged_id, seq = project.allocate_node()
    project.tree.attach(
        ThoughtNode(
            id=merged_id,
            parent=first.parent,
            action=action,
            paragraph=parsed.explanation,
            brief=parsed.summary,
            anchor=anchor,
            incoming_reason=f"grouped {len(ordered)} steps into one",
            origin=NodeOrigin.GROUP,
            seq=seq,
        )
    )
    copies = copy_suffix(project, suffix_ids, merged_id)
    project.active_chain = path_to(project.tree, merged_id) + copies
    project.emit(EventKind.CHAIN_CHANGED.value, chain_changed_payload(project))
    return BranchFork(fork_parent=first.parent, new_nodes=[merged_id], copied_suffix=copies)


def parse_split_response(raw: str) -> list[ParsedWriteResponse]:
    """Parse a multi-step writing response: one block per STEP label."""
    parsed: list[ParsedWriteResponse] = []
    for block in _STEP_BLOCK_RE.split(raw):
        if not re.match(r"^\s*STEP\s*:", block):
            continue
        try:
            parsed.append(parse_write_response(block))
        except Exception:
            continue
    if not parsed:
        raise ValueError("no parseable STEP blocks")
    return parsed


def split_node(project: Project, node_id: str, engine: AgentEngine) -> BranchFork:
    """Elaborate one node into several consecutive steps on a new branch."""
    source = project.require_source()
    node = project.tree.node(node_id)
    if node.is_root:
        raise RootSelected("cannot split the root")

    skeleton = build_intervention_prompt(
        InterventionKind.SPLIT_MULTI_STEP,
        {"code": _node_code(project, node)},
        engine.templates,
    )
    instruction = (
        f"{skeleton}\n\nThe original paragraph:\n{node.paragraph}\n\n"
        "Rewrite it as at least two consecutive steps, each with its own STEP block."
    )
    assert node.parent is not None
    base_chain = path_to(project.tree, node.parent)
    blocks = engine.complete_write_prompt(
        source, project.tree, base_chain, instruction, parse_split_response
    )
    if len(blocks) < 2:
        raise ModelReturnedSingleParagraph("split produced a single paragraph")

    suffix_ids = _active_suffix_below(project, node_id)
    new_ids: list[str] = []
    parent = node.parent
    previous = last_resolved_range(project.tree, base_chain)
    for parsed in blocks:
        if parsed.quoted_code.strip():
            anchor = resolve_anchor(parsed, source, previous=previous)
            action = ActionType.WRITE_CODE_EXPLANATION
            if anchor.resolved is not None:
                previous = anchor.resolved
        elif node.action is ActionType.WRITE_CODE_EXPLANATION:
            anchor = TextCodeAnchor(
                step_number=parsed.step_number,
                quoted_code="",
                resolved=None,
                status=AnchorStatus.NO_CODE,
                explanation=parsed.explanation,
                summary=parsed.summary,
            )
            action = ActionType.WRITE_CODE_EXPLANATION
        else:
            anchor = None
            action = node.action if node.action is not None else ActionType.WRITE_BACKGROUND
        new_id, seq = project.allocate_node()
        project.tree.attach(
            ThoughtNode(
                id=new_id,
                parent=parent,
                action=action,
                paragraph=parsed.explanation,
                brief=parsed.summary,
                anchor=anchor,
                incoming_reason=f"split of: {node.brief}",
                origin=NodeOrigin.SPLIT,
                seq=seq,
            )
        )
        new_ids.append(new_id)
        parent = new_id

    copies = copy_suffix(project, suffix_ids, new_ids[-1])
    project.active_chain = path_to(project.tree, new_ids[-1]) + copies
    project.emit(EventKind.CHAIN_CHANGED.value, chain_changed_payload(project))
    return BranchFork(fork_parent=node.parent, new_nodes=new_ids, copied_suffix=copies)


def trim_node(project: Project, node_id: str) -> int:
    """Remove a node and its whole subtree; returns how many nodes went.

    If the active chain ran through the node it is truncated to the node's
    parent. Freed ids are never reused.
    """
    node = project.tree.node(node_id)
    if node.is_root:
        raise RootSelected("cannot trim the root")
    removed = {node_id} | project.tree.descendants(node_id)
    if node_id in project.active_chain:
        project.active_chain = project.active_chain[: project.active_chain.index(node_id)]
    for nid in removed:
        del project.tree.nodes[nid]
    for sid in [s.id for s in project.tree.stubs.values() if s.parent in removed]:
        del project.tree.stubs[sid]
    project.emit(
        EventKind.CHAIN_CHANGED.value,
        {**chain_changed_payload(project), "removed_node_ids": sorted(removed)},
    )
    return len(removed)


def assemble_quick(project: Project, node_id: str) -> Chain:
    """Make the path to ``node_id`` the active chain (quick assembling)."""
    chain = path_to(project.tree, node_id)
    project.active_chain = chain
    project.emit(EventKind.CHAIN_CHANGED.value, chain_changed_payload(project))
    return chain


def enumerate_choices(project: Project, node_id: str, top_k: int = 3) -> list[Choice]:
    """The top continuations below a node: children and unexpanded stubs,
    most-voted first, creation order on ties."""
    node = project.tree.node(node_id)
    entries: list[Choice] = []
    for child in project.tree.children(node.id):
        entries.append(
            Choice(
                id=child.id,
                kind="node",
                action=child.action if child.action is not None else ActionType.FINISH,
                votes=child.incoming_votes,
                reason=child.incoming_reason,
                label=child.brief,
                seq=child.seq,
            )
        )
    for stub in project.tree.stubs_of(node.id):
        entries.append(
            Choice(
                id=stub.id,
                kind="stub",
                action=stub.action,
                votes=stub.votes,
                reason=stub.rationale,
                label="",
                seq=stub.seq,
            )
        )
    entries.sort(key=lambda c: (-c.votes, c.seq))
    return entries[:top_k]


def extend_step(project: Project, node_id: str, choice_id: str, engine: AgentEngine) -> str:
    """Walk the chain one step deeper: into an existing child, or by
    materializing a stub through a writing completion."""
    project.tree.node(node_id)
    if choice_id in project.tree.nodes:
        child = project.tree.node(choice_id)
        if child.parent != node_id:
            raise InvalidArgument(f"{choice_id} is not a choice under {node_id}")
        project.active_chain = path_to(project.tree, choice_id)
        project.emit(EventKind.CHAIN_CHANGED.value, chain_changed_payload(project))
        return choice_id
    if choice_id not in project.tree.stubs:
        raise NotFound(f"unknown choice: {choice_id}")
    stub = project.tree.stubs[choice_id]
    if stub.parent != node_id:
        raise InvalidArgument(f"{choice_id} is not a choice under {node_id}")
    source = project.require_source()
    thought = Thought(
        action=stub.action, rationale=stub.rationale, target=stub.target, votes=stub.votes
    )
    base_chain = path_to(project.tree, node_id)
    new_id, seq = project.allocate_node()
    node = engine.execute_action(
        source, base_chain, thought, tree=project.tree, node_id=new_id, seq=seq
    )
    # The completion succeeded; only now does the stub give way to the node.
    project.tree.attach(node)
    del project.tree.stubs[choice_id]
    project.active_chain = path_to(project.tree, node.id)
    project.emit(EventKind.CHAIN_CHANGED.value, chain_changed_payload(project))
    return node.id
