"""Core domain types: source documents, thoughts, the thought tree and chains.

Everything here is plain data with validation — no I/O and no model calls.
Value types are frozen; the tree is the one mutable container and is only
mutated through the operations in :mod:`sprout.treeops` and
:mod:`sprout.engine` under the project store's single-writer contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import InvalidArgument, NotFound

ROOT_ID = "root"


class ActionType(str, Enum):
    """The writable tutorial content categories plus the stopping sentinel."""

    WRITE_TITLE = "WriteTitle"
    WRITE_BACKGROUND = "WriteBackground"
    WRITE_CODE_EXPLANATION = "WriteCodeExplanation"
    WRITE_NOTIFICATION = "WriteNotification"
    WRITE_SUMMARY = "WriteSummary"
    FINISH = "Finish"


#: Actions that produce a tutorial paragraph. Finish produces nothing.
WRITABLE_ACTIONS = tuple(a for a in ActionType if a is not ActionType.FINISH)


class AnchorStatus(str, Enum):
    RESOLVED = "Resolved"
    NO_CODE = "NoCode"
    CONTENT_MISMATCH = "ContentMismatch"
    AMBIGUOUS = "Ambiguous"


class NodeOrigin(str, Enum):
    AGENT = "Agent"
    USER_DEFINED = "UserDefined"
    GROUP = "Group"
    SPLIT = "Split"
    REFINE = "Refine"


@dataclass(frozen=True)
class SourceDocument:
    """The source code a tutorial describes. Immutable once referenced:
    anchors cite line numbers into it."""

    language_tag: str
    text: str

    def __post_init__(self):
        if not self.text:
            raise InvalidArgument("source text must be non-empty")

    @property
    def line_count(self) -> int:
        # A trailing newline does not add an empty final line.
        return len(self.text.splitlines())

    def lines(self) -> list[str]:
        return self.text.splitlines()

    def slice(self, rng: CodeRange) -> str:
        """The verbatim source lines covered by ``rng``, newline-joined."""
        if not rng.valid_in(self):
            raise InvalidArgument(f"range {rng} outside 1..{self.line_count}")
        return "\n".join(self.lines()[rng.start_line - 1 : rng.end_line])


@dataclass(frozen=True, order=True)
class CodeRange:
    """An inclusive, 1-based line range."""

    start_line: int
    end_line: int

    def __post_init__(self):
        if self.start_line < 1 or self.end_line < self.start_line:
            raise InvalidArgument(f"bad range ({self.start_line}, {self.end_line})")

    def valid_in(self, source: SourceDocument) -> bool:
        return self.end_line <= source.line_count

    def clamped(self, source: SourceDocument) -> CodeRange:
        start = min(max(self.start_line, 1), source.line_count)
        end = min(max(self.end_line, start), source.line_count)
        return CodeRange(start, end)

    def overlap(self, other: CodeRange) -> int:
        """Number of shared lines."""
        lo = max(self.start_line, other.start_line)
        hi = min(self.end_line, other.end_line)
        return max(0, hi - lo + 1)


@dataclass(frozen=True)
class Thought:
    """A candidate next action with its rationale, before the agent commits."""

    action: ActionType
    rationale: str
    target: CodeRange | None = None
    votes: int = 0

    def __post_init__(self):
        if (self.target is not None) != (self.action is ActionType.WRITE_CODE_EXPLANATION):
            raise InvalidArgument("target is present iff action is WriteCodeExplanation")
        if self.votes < 0:
            raise InvalidArgument("votes must be non-negative")

    def with_votes(self, votes: int) -> Thought:
        return replace(self, votes=votes)


@dataclass(frozen=True)
class AgentStep:
    """One recorded ReAct iteration: what was observed, proposed and chosen."""

    step_index: int
    observation: str
    thoughts: tuple[Thought, ...]
    chosen_index: int
    produced_node: str | None

    def __post_init__(self):
        if self.step_index < 1:
            raise InvalidArgument("step_index must be positive")
        if not 0 <= self.chosen_index < len(self.thoughts):
            raise InvalidArgument("chosen_index out of range")
        chose_finish = self.thoughts[self.chosen_index].action is ActionType.FINISH
        if chose_finish != (self.produced_node is None):
            raise InvalidArgument("produced_node is absent iff the chosen action is Finish")


@dataclass(frozen=True)
class TextCodeAnchor:
    """A paragraph's link to the source: what the model quoted and where it
    landed. ``ambiguous`` flags multi-candidate resolutions for review."""

    step_number: int
    quoted_code: str
    resolved: CodeRange | None
    status: AnchorStatus
    explanation: str
    summary: str
    ambiguous: bool = False

    def __post_init__(self):
        if (self.status is AnchorStatus.RESOLVED) != (self.resolved is not None):
            raise InvalidArgument("status is Resolved iff a range was resolved")
        if (self.status is AnchorStatus.NO_CODE) != (not self.quoted_code.strip()):
            raise InvalidArgument("status is NoCode iff quoted_code is blank")


@dataclass(frozen=True)
class ThoughtNode:
    """One generated paragraph in the tree, with provenance."""

    id: str
    parent: str | None
    action: ActionType | None  # None only on the synthetic root
    paragraph: str
    brief: str
    anchor: TextCodeAnchor | None = None
    incoming_votes: int = 0
    incoming_reason: str = ""
    origin: NodeOrigin = NodeOrigin.AGENT
    seq: int = 0  # creation order; ids stay opaque

    @property
    def is_root(self) -> bool:
        return self.parent is None


@dataclass(frozen=True)
class ThoughtStub:
    """An unchosen thought kept on the tree so branch exploration can expand
    it later. Not a node: it has no paragraph yet."""

    id: str
    parent: str
    action: ActionType
    rationale: str
    target: CodeRange | None
    votes: int
    seq: int


@dataclass
class ThoughtTree:
    """The agent's branching memory. Parent links form a tree rooted at a
    synthetic sentinel that carries no paragraph."""

    root: str = ROOT_ID
    nodes: dict[str, ThoughtNode] = field(default_factory=dict)
    stubs: dict[str, ThoughtStub] = field(default_factory=dict)

    @classmethod
    def empty(cls) -> ThoughtTree:
        tree = cls()
        tree.nodes[ROOT_ID] = ThoughtNode(
            id=ROOT_ID, parent=None, action=None, paragraph="", brief=""
        )
        return tree

    def node(self, node_id: str) -> ThoughtNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise NotFound(f"unknown node: {node_id}") from None

    def children(self, node_id: str) -> list[ThoughtNode]:
        """Children in creation order."""
        kids = [n for n in self.nodes.values() if n.parent == node_id]
        kids.sort(key=lambda n: n.seq)
        return kids

    def stubs_of(self, node_id: str) -> list[ThoughtStub]:
        out = [s for s in self.stubs.values() if s.parent == node_id]
        out.sort(key=lambda s: s.seq)
        return out

    def descendants(self, node_id: str) -> set[str]:
        """Every node id reachable below ``node_id`` (exclusive)."""
        out: set[str] = set()
        frontier = [node_id]
        while frontier:
            current = frontier.pop()
            for child in self.children(current):
                if child.id not in out:
                    out.add(child.id)
                    frontier.append(child.id)
        return out

    def attach(self, node: ThoughtNode) -> None:
        """Low-level insertion; callers are responsible for validity."""
        if node.id in self.nodes:
            raise InvalidArgument(f"duplicate node id: {node.id}")
        if node.parent is not None and node.parent not in self.nodes:
            raise NotFound(f"unknown parent: {node.parent}")
        self.nodes[node.id] = node

    def attach_stub(self, stub: ThoughtStub) -> None:
        if stub.parent not in self.nodes:
            raise NotFound(f"unknown parent: {stub.parent}")
        self.stubs[stub.id] = stub


#: A root-to-node path; the first element is always the root sentinel.
Chain = list[str]


@dataclass(frozen=True)
class TutorialBlock:
    paragraph: str
    brief: str
    anchor: TextCodeAnchor | None


@dataclass(frozen=True)
class IntentKey:
    """What a paragraph is *for*: its action type plus, for code
    explanations, the resolved range. Nodes sharing a key are
    interchangeable alternatives."""

    action: ActionType
    target: CodeRange | None


def validate_tree(tree: ThoughtTree) -> list[str]:
    """Check every tree invariant; one entry per violation, naming the node.

    Violations are returned rather than raised so raw deserialization can be
    audited without try/except pyramids.
    """
    violations: list[str] = []
    if tree.root not in tree.nodes:
        return [f"missing-root: {tree.root}"]
    root = tree.nodes[tree.root]
    if root.parent is not None:
        violations.append(f"root-has-parent: {tree.root}")
    if root.paragraph or root.action is not None:
        violations.append(f"root-not-sentinel: {tree.root}")

    # Parent links: every non-root parent must exist, and walking parents
    # must reach the root without revisiting anyone.
    state: dict[str, str] = {}  # id -> "ok" | "bad"
    for node_id, node in tree.nodes.items():
        if node.id != node_id:
            violations.append(f"id-mismatch: {node_id}")
        if node_id == tree.root:
            continue
        if node.parent is None or node.parent not in tree.nodes:
            violations.append(f"missing-parent: {node_id}")
            state[node_id] = "bad"
            continue
        if node_id in state:
            continue
        walk: list[str] = []
        seen: set[str] = set()
        current: str | None = node_id
        while True:
            if current == tree.root or state.get(current) == "ok":
                for nid in walk:
                    state[nid] = "ok"
                break
            if current in seen:
                violations.append(f"cycle: {current}")
                for nid in walk:
                    state[nid] = "bad"
                break
            if state.get(current) == "bad":
                for nid in walk:
                    state[nid] = "bad"
                break
            seen.add(current)
            walk.append(current)
            parent = tree.nodes[current].parent
            if parent is None or parent not in tree.nodes:
                # the offending ancestor is reported on its own iteration
                for nid in walk:
                    state[nid] = "bad"
                break
            current = parent

    for node_id, node in tree.nodes.items():
        if node_id == tree.root:
            continue
        if node.action is None:
            violations.append(f"missing-action: {node_id}")
            continue
        has_anchor = node.anchor is not None
        if has_anchor != (node.action is ActionType.WRITE_CODE_EXPLANATION):
            violations.append(f"anchor-mismatch: {node_id}")
        if not node.brief:
            violations.append(f"empty-brief: {node_id}")

    for stub_id, stub in tree.stubs.items():
        if stub.parent not in tree.nodes:
            violations.append(f"missing-parent: {stub_id}")
    return violations


def path_to(tree: ThoughtTree, node_id: str) -> Chain:
    """The unique root-to-node path. Raises NotFound for unknown ids."""
    node = tree.node(node_id)
    path = [node.id]
    hops = 0
    while node.parent is not None:
        if node.parent not in tree.nodes or hops > len(tree.nodes):
            raise InvalidArgument(f"broken parent chain at {node.id}")
        node = tree.nodes[node.parent]
        path.append(node.id)
        hops += 1
    path.reverse()
    return path


def chain_is_valid(tree: ThoughtTree, chain: Chain) -> bool:
    """True iff ``chain`` starts at root and follows parent links."""
    if not chain or chain[0] != tree.root:
        return False
    if any(node_id not in tree.nodes for node_id in chain):
        return False
    for parent_id, child_id in zip(chain, chain[1:]):
        if tree.nodes[child_id].parent != parent_id:
            return False
    return True


def intent_key(node: ThoughtNode) -> IntentKey:
    """The (action, resolved range) pair identifying interchangeable nodes.

    Unresolved anchors (NoCode / ContentMismatch) yield an absent target, so
    two hallucinated explanations group together rather than nowhere.
    """
    if node.is_root or node.action is None:
        raise InvalidArgument("root has no intent")
    target = node.anchor.resolved if node.anchor is not None else None
    return IntentKey(action=node.action, target=target)


def tutorial_document(tree: ThoughtTree, chain: Chain) -> list[TutorialBlock]:
    """The document a chain denotes: one block per non-root node, in order."""
    blocks = []
    for node_id in chain[1:]:
        node = tree.node(node_id)
        blocks.append(TutorialBlock(node.paragraph, node.brief, node.anchor))
    return blocks
