"""Alternative exploration and refinement: embed paragraphs, project them to
2D, group them by intent, and produce refined variants.

The projector is pluggable; the default is a deterministic PCA reduction,
which doubles as the degenerate-input fallback. Embeddings are cached by
paragraph hash so a refresh after one edit does not re-embed the tree.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .anchors import parse_write_response, truncate_summary
from .engine import AgentEngine, chain_changed_payload
from .errors import EmptyRewrite, IntentMismatch, InvalidArgument, NotOnActiveChain, RootSelected
from .events import EventKind
from .gateway import Gateway
from .model import Chain, IntentKey, NodeOrigin, intent_key, path_to
from .prompts import InterventionKind, build_intervention_prompt
from .store import Project
from .treeops import copy_suffix


class DetailLevel(str, Enum):
    SHORTER = "Shorter"
    LONGER = "Longer"


@dataclass(frozen=True)
class RefineSpec:
    """What to change about a paragraph: a style, a detail direction, a free
    prompt, or any combination. At least one must be set."""

    style: str | None = None
    detail: DetailLevel | None = None
    custom_prompt: str | None = None

    def __post_init__(self):
        if self.style is None and self.detail is None and self.custom_prompt is None:
            raise InvalidArgument("refine spec must set at least one field")


@dataclass(frozen=True)
class NodePoint:
    node_id: str
    vector: tuple[float, ...]
    position: tuple[float, float]
    intent: IntentKey


DEFAULT_STYLES = ("formal", "conversational", "beginner-friendly", "concise-technical")

Projector = Callable[[Sequence[Sequence[float]], int], list[tuple[float, float]]]


def pca_project(vectors: Sequence[Sequence[float]], seed: int = 0) -> list[tuple[float, float]]:
    """Deterministic 2D PCA. The seed is accepted for interface parity; PCA
    needs none. Component signs are fixed so runs are bit-identical."""
    n = len(vectors)
    if n == 0:
        return []
    if n == 1:
        return [(0.0, 0.0)]
    matrix = np.asarray(vectors, dtype=float)
    centered = matrix - matrix.mean(axis=0)
    if not np.any(np.abs(centered) > 1e-12):
        return [(0.0, 0.0)] * n
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:2].copy()
    for row in components:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1
    projected = centered @ components.T
    if projected.shape[1] < 2:
        projected = np.hstack([projected, np.zeros((n, 1))])
    return [(float(x), float(y)) for x, y in projected]


PROJECTORS: dict[str, Projector] = {"pca": pca_project}


def _projector_for(project: Project) -> Projector:
    name = project.config.get("nodespace", {}).get("projector", "pca")
    # unknown/unavailable reducers fall back to the deterministic default
    return PROJECTORS.get(name, pca_project)


def paragraph_hash(paragraph: str) -> str:
    return hashlib.sha256(paragraph.encode("utf-8")).hexdigest()


def refresh_points(project: Project, gateway: Gateway) -> list[NodePoint]:
    """Embed every non-root paragraph (cached by content hash) and lay the
    vectors out in 2D. Deterministic for a fixed node set and seed."""
    nodes = sorted(
        (n for n in project.tree.nodes.values() if not n.is_root), key=lambda n: n.seq
    )
    if not nodes:
        raise InvalidArgument("the tree has no paragraphs to embed")
    hashes = [paragraph_hash(n.paragraph) for n in nodes]
    missing_texts: list[str] = []
    missing_hashes: list[str] = []
    for node, digest in zip(nodes, hashes):
        if digest not in project.embedding_cache and digest not in missing_hashes:
            missing_hashes.append(digest)
            missing_texts.append(node.paragraph)
    if missing_texts:
        vectors = gateway.embed(missing_texts)  # GatewayError: cache stays stale
        for digest, vector in zip(missing_hashes, vectors):
            project.embedding_cache[digest] = [float(x) for x in vector]
    all_vectors = [project.embedding_cache[d] for d in hashes]
    positions = _projector_for(project)(all_vectors, project.seed)
    return [
        NodePoint(
            node_id=node.id,
            vector=tuple(vector),
            position=position,
            intent=intent_key(node),
        )
        for node, vector, position in zip(nodes, all_vectors, positions)
    ]


def alternatives_for(project: Project, node_id: str) -> list[str]:
    """Every other non-root node with the same intent, wherever it lives in
    the tree (inactive branches included), in creation order."""
    node = project.tree.node(node_id)
    if node.is_root:
        raise InvalidArgument("root has no alternatives")
    key = intent_key(node)
    matches = [
        other.id
        for other in sorted(project.tree.nodes.values(), key=lambda n: n.seq)
        if not other.is_root and other.id != node_id and intent_key(other) == key
    ]
    return matches


def _parse_refine_response(raw: str) -> tuple[str, str]:
    text = raw.strip()
    if not text:
        raise EmptyRewrite("the model returned a blank rewrite")
    try:
        parsed = parse_write_response(raw)
        return parsed.explanation, parsed.summary
    except Exception:
        return text, truncate_summary(text)


def configured_styles(project: Project) -> tuple[str, ...]:
    styles = project.config.get("refine", {}).get("styles")
    if isinstance(styles, (list, tuple)) and styles:
        return tuple(str(s) for s in styles)
    return DEFAULT_STYLES


def refine_node(project: Project, node_id: str, spec: RefineSpec, engine: AgentEngine) -> str:
    """Produce a refined variant as a sibling with the same intent.

    If the original sits on the active chain, the chain is re-pointed
    through the new node with the downstream suffix copied (the same
    copy-on-write rule the tree operations use). The original stays put.
    """
    source = project.require_source()
    node = project.tree.node(node_id)
    if node.is_root:
        raise RootSelected("cannot refine the root")
    if spec.style is not None and spec.style not in configured_styles(project):
        raise InvalidArgument(f"unknown style {spec.style!r}")

    code_text = node.paragraph
    if node.anchor is not None:
        if node.anchor.resolved is not None:
            code_text = source.slice(node.anchor.resolved)
        elif node.anchor.quoted_code.strip():
            code_text = node.anchor.quoted_code

    parts: list[str] = []
    applied: list[str] = []
    if spec.style is not None:
        parts.append(
            build_intervention_prompt(
                InterventionKind.STYLE_REFINE,
                {"code": code_text, "style": spec.style},
                engine.templates,
            )
        )
        applied.append(f"style={spec.style}")
    if spec.detail is not None:
        parts.append(
            build_intervention_prompt(
                InterventionKind.DETAIL_REFINE,
                {"direction": spec.detail.value.lower()},
                engine.templates,
            )
        )
        applied.append(spec.detail.value.lower())
    if spec.custom_prompt is not None:
        parts.append(
            build_intervention_prompt(
                InterventionKind.FREE_REFINE,
                {"prompt": spec.custom_prompt},
                engine.templates,
            )
        )
        applied.append("custom prompt")

    instruction = (
        "\n".join(parts)
        + f"\n\nThe original paragraph:\n{node.paragraph}\n\nIts code:\n```\n{code_text}\n```\n"
        "Rewrite that paragraph accordingly. It must describe the same code."
    )
    assert node.parent is not None
    base_chain = path_to(project.tree, node.parent)
    paragraph, brief = engine.complete_write_prompt(
        source, project.tree, base_chain, instruction, _parse_refine_response
    )

    anchor = None
    if node.anchor is not None:
        anchor = replace(node.anchor, explanation=paragraph, summary=brief)
    new_id, seq = project.allocate_node()
    project.tree.attach(
        replace(
            node,
            id=new_id,
            paragraph=paragraph,
            brief=brief,
            anchor=anchor,
            incoming_votes=0,
            incoming_reason="refined: " + ", ".join(applied),
            origin=NodeOrigin.REFINE,
            seq=seq,
        )
    )
    if node_id in project.active_chain:
        index = project.active_chain.index(node_id)
        suffix = project.active_chain[index + 1 :]
        copies = copy_suffix(project, suffix, new_id)
        project.active_chain = project.active_chain[:index] + [new_id] + copies
    project.emit(EventKind.CHAIN_CHANGED.value, chain_changed_payload(project))
    return new_id


def adopt_alternative(project: Project, node_id: str, alternative_id: str) -> Chain:
    """Swap an active-chain node for a same-intent alternative, copying the
    downstream suffix beneath it. The original branch stays intact."""
    node = project.tree.node(node_id)
    alternative = project.tree.node(alternative_id)
    if node_id == alternative_id:
        raise InvalidArgument("a node cannot adopt itself")
    if intent_key(node) != intent_key(alternative):
        raise IntentMismatch(f"{alternative_id} has a different intent than {node_id}")
    if node_id not in project.active_chain:
        raise NotOnActiveChain(f"{node_id} is not on the active chain")
    index = project.active_chain.index(node_id)
    suffix = project.active_chain[index + 1 :]
    copies = copy_suffix(project, suffix, alternative_id)
    project.active_chain = path_to(project.tree, alternative_id) + copies
    project.emit(EventKind.CHAIN_CHANGED.value, chain_changed_payload(project))
    return project.active_chain
