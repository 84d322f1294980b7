"""The ReAct loop with tree-of-thought expansion and voting.

Each step plans candidate thoughts from an observation, votes on them,
executes the winner as a writing completion, and attaches the produced node
to the active chain. Unchosen thoughts stay on the tree as stubs so branch
exploration can expand them later.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence

from .anchors import (
    ParsedWriteResponse,
    parse_write_response,
    resolve_anchor,
    truncate_summary,
)
from .errors import InvalidArgument, MissingField, UnparseableResponse
from .events import EventKind
from .gateway import (
    ChatMessage,
    ChatRequest,
    EXTRACTION_TEMPERATURE,
    GENERATION_TEMPERATURE,
    Gateway,
    VOTING_TEMPERATURE,
)
from .model import (
    ActionType,
    AgentStep,
    Chain,
    CodeRange,
    NodeOrigin,
    SourceDocument,
    TextCodeAnchor,
    Thought,
    ThoughtNode,
    ThoughtStub,
    ThoughtTree,
)
from .prompts import InterventionKind, PromptTemplateSet, build_intervention_prompt, load_templates
from .store import Project, anchor_to_dict, node_to_dict, project_to_dict

MAX_REASKS = 2
FULL_CONTEXT_TAIL = 2  # chain nodes quoted in full; earlier ones appear as briefs

EventSink = Callable[[str, dict], None]

_ACTION_LOOKUP = {a.value.lower(): a for a in ActionType}
_RANGE_RE = re.compile(r"lines?\s+(\d+)(?:\s*[-–]\s*(\d+))?")
_THOUGHT_SPLIT_RE = re.compile(r"^\s*THOUGHT\s+\d+\s*:", re.MULTILINE)
_OBSERVATION_RE = re.compile(
    r"OBSERVATION\s*:\s*(.*?)(?=^\s*THOUGHT\s+\d+\s*:|\Z)", re.DOTALL | re.MULTILINE
)
_ACTION_RE = re.compile(r"ACTION\s*:\s*([A-Za-z_]+)")
_RATIONALE_RE = re.compile(
    r"RATIONALE\s*:\s*(.*?)(?=^\s*(?:THOUGHT\s+\d+|ACTION)\s*:|\Z)", re.DOTALL | re.MULTILINE
)
_VOTE_RE = re.compile(r"VOTE\s*:\s*(\d+)")
_TITLE_RE = re.compile(r"TITLE\s*:\s*(.+)")


@dataclass(frozen=True)
class GenerationBudget:
    """How wide and how long a run may go: k candidate thoughts per step,
    v votes per step, at most max_steps steps."""

    max_steps: int = 8
    candidates_per_step: int = 3
    votes_per_step: int = 3

    def __post_init__(self):
        if self.max_steps < 1 or self.candidates_per_step < 1 or self.votes_per_step < 1:
            raise InvalidArgument("budget fields must be positive")


def choose_thought(thoughts: Sequence[Thought]) -> int:
    """Index of the most-voted thought; ties go to generation order."""
    if not thoughts:
        raise InvalidArgument("no thoughts to choose from")
    best = 0
    for i, thought in enumerate(thoughts):
        if thought.votes > thoughts[best].votes:
            best = i
    return best


def last_resolved_range(tree: ThoughtTree, chain: Chain) -> CodeRange | None:
    """The most recent resolved anchor along a chain; proximity to it breaks
    ambiguous matches, since tutorials walk the code top to bottom."""
    for node_id in reversed(chain[1:]):
        anchor = tree.node(node_id).anchor
        if anchor is not None and anchor.resolved is not None:
            return anchor.resolved
    return None


def render_context(tree: ThoughtTree, chain: Chain) -> str:
    """The tutorial-so-far block: briefs for everything except the last two
    nodes, which appear in full (token budget over completeness)."""
    body = chain[1:]
    if not body:
        return "The tutorial is empty so far."
    lines = ["Tutorial so far:"]
    for i, node_id in enumerate(body):
        node = tree.node(node_id)
        text = node.paragraph if i >= len(body) - FULL_CONTEXT_TAIL else node.brief
        action = node.action.value if node.action is not None else ""
        lines.append(f"{i + 1}. [{action}] {text}")
    return "\n".join(lines)


def parse_plan_response(
    raw: str, source: SourceDocument
) -> tuple[str, list[Thought]]:
    """Pull the observation and thought candidates out of a planning reply.

    Malformed thoughts are dropped: an unknown action name, or a
    WriteCodeExplanation without a parseable line range. Ranges are clamped
    to the source bounds.
    """
    observation_match = _OBSERVATION_RE.search(raw)
    observation = observation_match.group(1).strip() if observation_match else ""
    thoughts: list[Thought] = []
    for block in _THOUGHT_SPLIT_RE.split(raw)[1:]:
        action_match = _ACTION_RE.search(block)
        if action_match is None:
            continue
        action = _ACTION_LOOKUP.get(action_match.group(1).lower())
        if action is None:
            continue
        rationale_match = _RATIONALE_RE.search(block)
        rationale = rationale_match.group(1).strip() if rationale_match else ""
        target = None
        if action is ActionType.WRITE_CODE_EXPLANATION:
            range_match = _RANGE_RE.search(block)
            if range_match is None:
                continue
            start = int(range_match.group(1))
            end = int(range_match.group(2)) if range_match.group(2) else start
            if start > end:
                start, end = end, start
            target = CodeRange(max(start, 1), max(end, 1)).clamped(source)
        thoughts.append(Thought(action=action, rationale=rationale, target=target))
    return observation, thoughts


class AgentEngine:
    """Drives one gateway with one template set. Stateless between calls;
    all state lives on the project."""

    def __init__(
        self,
        gateway: Gateway,
        templates: PromptTemplateSet | None = None,
        seed: int | None = None,
    ):
        self.gateway = gateway
        self.templates = templates if templates is not None else load_templates()
        self.seed = seed

    # -- low-level ---------------------------------------------------------

    def _converse(self, user_prompt: str, parser, temperature: float):
        """Issue a completion and parse it, re-asking at most MAX_REASKS
        times with an error-describing message before giving up."""
        messages = [
            ChatMessage("system", self.templates.system_preamble),
            ChatMessage("user", user_prompt),
        ]
        last_error: Exception | None = None
        for _ in range(1 + MAX_REASKS):
            response = self.gateway.complete(
                ChatRequest(tuple(messages), temperature=temperature, seed=self.seed)
            )
            try:
                return parser(response.content)
            except (MissingField, ValueError) as exc:
                last_error = exc
                messages.append(ChatMessage("assistant", response.content))
                messages.append(
                    ChatMessage(
                        "user",
                        f"Your reply was invalid ({exc}). "
                        "Answer again following the labeled block format exactly.",
                    )
                )
        raise UnparseableResponse(str(last_error))

    # -- planning ----------------------------------------------------------

    def plan_step(
        self,
        source: SourceDocument,
        chain: Chain,
        tree: ThoughtTree,
        k: int,
    ) -> tuple[str, list[Thought]]:
        context = render_context(tree, chain)
        prompt = self.templates.plan.format(
            language=source.language_tag,
            source=source.text,
            context=context,
            paragraph_count=len(chain) - 1,
            k=k,
        )
        has_title = any(
            tree.node(nid).action is ActionType.WRITE_TITLE for nid in chain[1:]
        )
        has_summary = any(
            tree.node(nid).action is ActionType.WRITE_SUMMARY for nid in chain[1:]
        )

        def parse(raw: str):
            observation, thoughts = parse_plan_response(raw, source)
            if has_title:
                thoughts = [t for t in thoughts if t.action is not ActionType.WRITE_TITLE]
            if not thoughts:
                raise ValueError("no parseable thoughts")
            return observation, thoughts

        observation, thoughts = self._converse(prompt, parse, GENERATION_TEMPERATURE)
        thoughts = thoughts[:k]
        # Once a summary exists the stopping sentinel is always on the table.
        if has_summary and not any(t.action is ActionType.FINISH for t in thoughts):
            thoughts.append(Thought(ActionType.FINISH, "the tutorial is complete"))
        return observation, thoughts

    # -- voting ------------------------------------------------------------

    def vote_thoughts(
        self, thoughts: Sequence[Thought], context: str, v: int
    ) -> list[Thought]:
        if not thoughts:
            raise InvalidArgument("thoughts must be non-empty")
        listing = []
        for i, thought in enumerate(thoughts):
            target = (
                f" lines {thought.target.start_line}-{thought.target.end_line}"
                if thought.target is not None
                else ""
            )
            listing.append(f"{i + 1}. {thought.action.value}{target}: {thought.rationale}")
        tallies = [0] * len(thoughts)
        for ballot in range(1, v + 1):
            prompt = self.templates.vote.format(
                context=context,
                thoughts="\n".join(listing),
                vote_index=ballot,
                vote_count=v,
            )
            response = self.gateway.complete(
                ChatRequest(
                    (
                        ChatMessage("system", self.templates.system_preamble),
                        ChatMessage("user", prompt),
                    ),
                    temperature=VOTING_TEMPERATURE,
                    seed=self.seed,
                )
            )
            match = _VOTE_RE.search(response.content)
            if match is None:
                continue  # malformed ballot is discarded
            index = int(match.group(1)) - 1
            if 0 <= index < len(tallies):
                tallies[index] += 1
        return [t.with_votes(n) for t, n in zip(thoughts, tallies)]

    # -- writing -----------------------------------------------------------

    def _write_instruction(self, source: SourceDocument, thought: Thought) -> str:
        action = thought.action
        if action is ActionType.WRITE_TITLE:
            return (
                "ACTION: WriteTitle\nWrite the tutorial title.\n"
                "Reply exactly:\nTITLE: <the title>"
            )
        if action is ActionType.WRITE_CODE_EXPLANATION:
            assert thought.target is not None
            rng = thought.target
            return (
                f"ACTION: WriteCodeExplanation\n"
                f"Target lines {rng.start_line}-{rng.end_line}:\n"
                f"```\n{source.slice(rng)}\n```\n"
                "Explain these lines for the reader, quoting them verbatim in the CODE block."
            )
        if action is ActionType.WRITE_BACKGROUND:
            return "ACTION: WriteBackground\nWrite the background the reader needs before the code."
        if action is ActionType.WRITE_NOTIFICATION:
            return (
                "ACTION: WriteNotification\n"
                "Point out a caveat, pitfall, or common mistake relevant to the tutorial."
            )
        if action is ActionType.WRITE_SUMMARY:
            return "ACTION: WriteSummary\nConclude the tutorial with a summary."
        raise InvalidArgument(f"{action.value} is not writable")

    def complete_write_prompt(
        self,
        source: SourceDocument,
        tree: ThoughtTree,
        chain: Chain,
        instruction: str,
        parser,
    ):
        """One writing completion with the standard envelope (source plus
        tutorial context), parsed by ``parser`` with re-asks."""
        prompt = self.templates.write.format(
            language=source.language_tag,
            source=source.text,
            context=render_context(tree, chain),
            instruction=instruction,
        )
        return self._converse(prompt, parser, EXTRACTION_TEMPERATURE)

    def execute_action(
        self,
        source: SourceDocument,
        chain: Chain,
        thought: Thought,
        *,
        tree: ThoughtTree,
        node_id: str,
        seq: int,
        origin: NodeOrigin = NodeOrigin.AGENT,
        instruction: str | None = None,
    ) -> ThoughtNode:
        """Run one writing completion and build the node. The node is not
        attached here; attachment belongs to the structural operations."""
        if thought.action is ActionType.FINISH:
            raise InvalidArgument("Finish produces no paragraph")
        prompt = self.templates.write.format(
            language=source.language_tag,
            source=source.text,
            context=render_context(tree, chain),
            instruction=instruction or self._write_instruction(source, thought),
        )
        anchor: TextCodeAnchor | None = None
        if thought.action is ActionType.WRITE_TITLE:
            paragraph, brief = self._converse(
                prompt, _parse_title_response, EXTRACTION_TEMPERATURE
            )
        else:
            parsed: ParsedWriteResponse = self._converse(
                prompt, parse_write_response, EXTRACTION_TEMPERATURE
            )
            paragraph, brief = parsed.explanation, parsed.summary
            if thought.action is ActionType.WRITE_CODE_EXPLANATION:
                anchor = resolve_anchor(
                    parsed, source, previous=last_resolved_range(tree, chain)
                )
        return ThoughtNode(
            id=node_id,
            parent=chain[-1],
            action=thought.action,
            paragraph=paragraph,
            brief=brief,
            anchor=anchor,
            incoming_votes=thought.votes,
            incoming_reason=thought.rationale,
            origin=origin,
            seq=seq,
        )

    # -- orchestration -----------------------------------------------------

    def run_autopilot(
        self,
        project: Project,
        budget: GenerationBudget,
        events: EventSink | None = None,
        pause=None,
    ) -> Chain:
        """Repeat plan, vote, choose, execute until Finish, budget, or pause.

        Every completed node stays on the tree whatever ends the run, and
        unchosen thoughts are recorded as sibling stubs for later expansion.
        """
        source = project.require_source()
        emit = events if events is not None else (lambda kind, payload: None)
        tree = project.tree
        chain = list(project.active_chain)

        for _ in range(budget.max_steps):
            if pause is not None and pause.is_set():
                emit(EventKind.PAUSED.value, {"steps_completed": len(project.steps)})
                project.active_chain = chain
                return chain
            step_index = len(project.steps) + 1
            emit(EventKind.STEP_STARTED.value, {"step_index": step_index})
            try:
                observation, thoughts = self.plan_step(
                    source, chain, tree, budget.candidates_per_step
                )
                emit(
                    EventKind.OBSERVATION.value,
                    {"step_index": step_index, "text": observation},
                )
                emit(
                    EventKind.THOUGHTS_PROPOSED.value,
                    {
                        "step_index": step_index,
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
                            for t in thoughts
                        ],
                    },
                )
                voted = self.vote_thoughts(
                    thoughts, render_context(tree, chain), budget.votes_per_step
                )
                chosen_index = choose_thought(voted)
                emit(
                    EventKind.VOTES.value,
                    {
                        "step_index": step_index,
                        "votes": [t.votes for t in voted],
                        "chosen_index": chosen_index,
                    },
                )
                chosen = voted[chosen_index]
                parent_id = chain[-1]

                produced: ThoughtNode | None = None
                if chosen.action is not ActionType.FINISH:
                    node_id, seq = project.allocate_node()
                    produced = self.execute_action(
                        source,
                        chain,
                        chosen,
                        tree=tree,
                        node_id=node_id,
                        seq=seq,
                    )
                    tree.attach(produced)

                for i, thought in enumerate(voted):
                    if i == chosen_index or thought.action is ActionType.FINISH:
                        continue
                    stub_id, stub_seq = project.allocate_node()
                    tree.attach_stub(
                        ThoughtStub(
                            id=stub_id,
                            parent=parent_id,
                            action=thought.action,
                            rationale=thought.rationale,
                            target=thought.target,
                            votes=thought.votes,
                            seq=stub_seq,
                        )
                    )
            except Exception as exc:
                emit(EventKind.ERROR.value, {"message": str(exc)})
                project.active_chain = chain
                raise

            project.steps.append(
                AgentStep(
                    step_index=step_index,
                    observation=observation,
                    thoughts=tuple(voted),
                    chosen_index=chosen_index,
                    produced_node=produced.id if produced is not None else None,
                )
            )

            if produced is None:  # Finish chosen
                project.active_chain = chain
                emit(EventKind.FINISHED.value, {"reason": "finish"})
                return chain

            chain.append(produced.id)
            project.active_chain = chain
            emit(
                EventKind.NODE_CREATED.value,
                {"step_index": step_index, "node": node_to_dict(produced)},
            )
            if produced.anchor is not None:
                emit(
                    EventKind.ANCHOR_RESOLVED.value,
                    {
                        "step_index": step_index,
                        "node_id": produced.id,
                        "anchor": anchor_to_dict(produced.anchor),
                    },
                )

        emit(EventKind.FINISHED.value, {"reason": "budget"})
        return chain

    def generate_for_selection(self, project: Project, rng: CodeRange) -> ThoughtNode:
        """User brushed a code range: write an explanation for exactly that
        selection and append it to the chain tail."""
        source = project.require_source()
        if not rng.valid_in(source):
            raise InvalidArgument(f"range outside source: {rng}")
        instruction = (
            build_intervention_prompt(
                InterventionKind.USER_DEFINED_GENERATION,
                {"code": source.slice(rng)},
                self.templates,
            )
            + f"\nACTION: WriteCodeExplanation\nTarget lines {rng.start_line}-{rng.end_line}."
            "\nQuote the code verbatim in the CODE block."
        )
        thought = Thought(
            action=ActionType.WRITE_CODE_EXPLANATION,
            rationale="user-selected code range",
            target=rng,
        )
        node_id, seq = project.allocate_node()
        node = self.execute_action(
            source,
            project.active_chain,
            thought,
            tree=project.tree,
            node_id=node_id,
            seq=seq,
            origin=NodeOrigin.USER_DEFINED,
            instruction=instruction,
        )
        project.tree.attach(node)
        project.active_chain = project.active_chain + [node.id]
        project.emit(
            EventKind.NODE_CREATED.value, {"step_index": None, "node": node_to_dict(node)}
        )
        if node.anchor is not None:
            project.emit(
                EventKind.ANCHOR_RESOLVED.value,
                {"step_index": None, "node_id": node.id, "anchor": anchor_to_dict(node.anchor)},
            )
        project.emit(EventKind.CHAIN_CHANGED.value, chain_changed_payload(project))
        return node


def chain_changed_payload(project: Project) -> dict:
    """Full structural state: the UI can rebuild its views from this alone."""
    snapshot = project_to_dict(project)
    return {"chain": snapshot["active_chain"], "tree": snapshot["tree"]}


def _parse_title_response(raw: str) -> tuple[str, str]:
    match = _TITLE_RE.search(raw)
    if match:
        title = match.group(1).strip()
        return title, truncate_summary(title)
    parsed = parse_write_response(raw)  # tolerate a full writing block
    return parsed.explanation, parsed.summary
