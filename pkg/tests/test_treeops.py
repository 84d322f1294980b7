"""Tree operations: group, split, trim, assembling, choices, extension."""

from __future__ import annotations

import random

import pytest

from sprout.errors import (
    ModelReturnedSingleParagraph,
    NonContiguousSelection,
    NotFound,
    RootSelected,
    SproutError,
    TransportError,
)
from sprout.engine import AgentEngine
from sprout.model import (
    ROOT_ID,
    ActionType,
    AnchorStatus,
    CodeRange,
    NodeOrigin,
    chain_is_valid,
    path_to,
    validate_tree,
)
from sprout.store import Project
from sprout.treeops import (
    assemble_quick,
    enumerate_choices,
    extend_step,
    group_nodes,
    parse_split_response,
    split_node,
    trim_node,
)
from sprout.prompts import load_templates

from conftest import add_node, add_stub, make_anchor, make_source, scripted_engine

GROUP_RESPONSE = (
    "STEP: 1\nCODE:\n```\nbeta = 2\n```\n"
    "EXPLANATION: merged paragraph text\nSUMMARY: merged brief"
)
SPLIT_RESPONSE = (
    "STEP: 1\nCODE:\n```\nalpha = 1\n```\n"
    "EXPLANATION: part one\nSUMMARY: brief one\n"
    "STEP: 2\n"
    "EXPLANATION: part two\nSUMMARY: brief two"
)


def ops_engine(split_response: str = SPLIT_RESPONSE) -> AgentEngine:
    return scripted_engine(
        [
            ("in one paragraph", GROUP_RESPONSE),
            ("in the next multiple steps", split_response),
            ("ACTION: WriteTitle", "TITLE: A Title"),
            ("Target lines", "STEP: 1\nCODE:\n```\ngamma = 3\n```\nEXPLANATION: expanded\nSUMMARY: expanded brief"),
            ("ACTION: Write", "STEP: 1\nEXPLANATION: expanded text\nSUMMARY: expanded brief"),
        ]
    )


def linear_project(n: int = 3) -> tuple[Project, list[str]]:
    project = Project(id="t", seed=0, source=make_source())
    ids = [ROOT_ID]
    for i in range(n):
        ids.append(add_node(project, ids[-1], paragraph=f"para {i}", brief=f"brief {i}"))
    project.active_chain = list(ids)
    return project, ids


class TestGroup:
    def test_group_two_of_three_builds_new_branch(self):
        project, ids = linear_project(3)
        root, a, b, c = ids
        before = dict(project.tree.nodes)
        fork = group_nodes(project, [a, b], ops_engine())
        # old branch byte-identical
        assert all(project.tree.nodes[nid] is node for nid, node in before.items())
        merged = fork.new_nodes[0]
        assert project.tree.node(merged).parent == root
        assert project.tree.node(merged).origin is NodeOrigin.GROUP
        assert len(fork.copied_suffix) == 1
        copy_of_c = fork.copied_suffix[0]
        assert project.tree.node(copy_of_c).paragraph == project.tree.node(c).paragraph
        assert copy_of_c != c
        assert project.active_chain == [root, merged, copy_of_c]
        assert validate_tree(project.tree) == []

    def test_group_at_tail_has_empty_suffix(self):
        project, ids = linear_project(3)
        fork = group_nodes(project, [ids[2], ids[3]], ops_engine())
        assert fork.copied_suffix == []

    def test_non_adjacent_selection_rejected(self):
        project, ids = linear_project(3)
        with pytest.raises(NonContiguousSelection):
            group_nodes(project, [ids[1], ids[3]], ops_engine())

    def test_sibling_selection_rejected(self):
        project, ids = linear_project(2)
        sibling = add_node(project, ids[1], paragraph="side")
        with pytest.raises(NonContiguousSelection):
            group_nodes(project, [ids[2], sibling], ops_engine())

    def test_root_selection_rejected(self):
        project, ids = linear_project(2)
        with pytest.raises(RootSelected):
            group_nodes(project, [ROOT_ID, ids[1]], ops_engine())

    def test_tree_untouched_on_gateway_error(self):
        class Failing:
            def complete(self, request):
                raise TransportError("down", attempts=3)

        project, ids = linear_project(3)
        engine = AgentEngine(Failing(), templates=load_templates())
        before_nodes = dict(project.tree.nodes)
        before_chain = list(project.active_chain)
        with pytest.raises(TransportError):
            group_nodes(project, [ids[1], ids[2]], engine)
        assert project.tree.nodes == before_nodes
        assert project.active_chain == before_chain

    def test_all_resolved_explanations_union_anchor(self):
        project = Project(id="t", seed=0, source=make_source())
        a = add_node(
            project, ROOT_ID, action=ActionType.WRITE_CODE_EXPLANATION,
            anchor=make_anchor(CodeRange(1, 1), quoted="alpha = 1"),
        )
        b = add_node(
            project, a, action=ActionType.WRITE_CODE_EXPLANATION,
            anchor=make_anchor(CodeRange(3, 3), quoted="gamma = 3"),
        )
        project.active_chain = [ROOT_ID, a, b]
        fork = group_nodes(project, [a, b], ops_engine())
        merged = project.tree.node(fork.new_nodes[0])
        assert merged.action is ActionType.WRITE_CODE_EXPLANATION
        assert merged.anchor.resolved == CodeRange(1, 3)  # union of (1,1) and (3,3)
        assert merged.anchor.status is AnchorStatus.RESOLVED

    def test_off_active_chain_group_copies_no_suffix(self):
        project, ids = linear_project(3)
        side_a = add_node(project, ROOT_ID, paragraph="side a", brief="sa")
        side_b = add_node(project, side_a, paragraph="side b", brief="sb")
        fork = group_nodes(project, [side_a, side_b], ops_engine())
        assert fork.copied_suffix == []
        merged = fork.new_nodes[0]
        # the chain still switches to the new branch
        assert project.active_chain == [ROOT_ID, merged]
        assert validate_tree(project.tree) == []

    def test_mixed_statuses_reresolved_and_flagged(self):
        project = Project(id="t", seed=0, source=make_source())
        a = add_node(
            project, ROOT_ID, action=ActionType.WRITE_CODE_EXPLANATION,
            anchor=make_anchor(None, quoted="", status=AnchorStatus.NO_CODE),
        )
        b = add_node(project, a, action=ActionType.WRITE_BACKGROUND)
        project.active_chain = [ROOT_ID, a, b]
        fork = group_nodes(project, [a, b], ops_engine())
        merged = project.tree.node(fork.new_nodes[0])
        assert merged.action is ActionType.WRITE_CODE_EXPLANATION
        assert merged.anchor.ambiguous is True
        # scripted merge quotes "beta = 2", which resolves to line 2
        assert merged.anchor.resolved == CodeRange(2, 2)


class TestSplit:
    def test_split_into_three(self):
        response = SPLIT_RESPONSE + "\nSTEP: 3\nEXPLANATION: part three\nSUMMARY: brief three"
        project, ids = linear_project(2)
        root, a, b = ids
        fork = split_node(project, b, ops_engine(response))
        assert len(fork.new_nodes) == 3
        assert project.tree.node(fork.new_nodes[0]).parent == a
        assert project.tree.node(fork.new_nodes[2]).parent == fork.new_nodes[1]
        assert all(
            project.tree.node(nid).origin is NodeOrigin.SPLIT for nid in fork.new_nodes
        )
        # original preserved, chain switched
        assert b in project.tree.nodes
        assert project.active_chain == [root, a, *fork.new_nodes]

    def test_split_tail_copied_suffix_empty(self):
        project, ids = linear_project(2)
        fork = split_node(project, ids[2], ops_engine())
        assert fork.copied_suffix == []

    def test_split_interior_copies_descendants(self):
        project, ids = linear_project(3)
        fork = split_node(project, ids[1], ops_engine())
        assert len(fork.copied_suffix) == 2
        originals = [project.tree.node(i).paragraph for i in ids[2:]]
        copies = [project.tree.node(i).paragraph for i in fork.copied_suffix]
        assert originals == copies

    def test_single_paragraph_rejected_tree_untouched(self):
        single = "STEP: 1\nEXPLANATION: only one\nSUMMARY: just one"
        project, ids = linear_project(2)
        before = dict(project.tree.nodes)
        with pytest.raises(ModelReturnedSingleParagraph):
            split_node(project, ids[1], ops_engine(single))
        assert project.tree.nodes == before

    def test_root_rejected(self):
        project, _ = linear_project(1)
        with pytest.raises(RootSelected):
            split_node(project, ROOT_ID, ops_engine())

    def test_parse_split_response_blocks(self):
        blocks = parse_split_response(SPLIT_RESPONSE)
        assert [b.explanation for b in blocks] == ["part one", "part two"]


class TestTrim:
    def test_trim_leaf(self):
        project, ids = linear_project(3)
        assert trim_node(project, ids[3]) == 1
        assert validate_tree(project.tree) == []

    def test_trim_subtree_count_matches_reachability_oracle(self):
        project, ids = linear_project(2)
        b = ids[2]
        c = add_node(project, b)
        d = add_node(project, b)
        e = add_node(project, d)
        # oracle: snapshot of the reachable set before removal
        reachable = {b} | project.tree.descendants(b)
        assert reachable == {b, c, d, e}
        assert trim_node(project, b) == len(reachable) == 4
        assert validate_tree(project.tree) == []
        assert b not in project.tree.nodes and e not in project.tree.nodes

    def test_trim_on_active_chain_truncates(self):
        project, ids = linear_project(3)
        root, a, b, c = ids
        trim_node(project, b)
        assert project.active_chain == [root, a]

    def test_trim_removes_attached_stubs(self):
        project, ids = linear_project(2)
        stub = add_stub(project, ids[2])
        trim_node(project, ids[2])
        assert stub not in project.tree.stubs

    def test_ids_never_reused_after_trim(self):
        project, ids = linear_project(2)
        trimmed = ids[2]
        trim_node(project, trimmed)
        fresh = add_node(project, ids[1])
        assert fresh != trimmed

    def test_root_rejected(self):
        project, _ = linear_project(1)
        with pytest.raises(RootSelected):
            trim_node(project, ROOT_ID)


class TestAssembleQuick:
    def test_select_root(self):
        project, ids = linear_project(2)
        assert assemble_quick(project, ROOT_ID) == [ROOT_ID]
        assert project.active_chain == [ROOT_ID]

    def test_side_branch_full_path(self):
        project, ids = linear_project(2)
        side = add_node(project, ids[1], paragraph="side")
        chain = assemble_quick(project, side)
        assert chain == [ROOT_ID, ids[1], side]

    def test_interior_node_chain_ends_there(self):
        project, ids = linear_project(3)
        chain = assemble_quick(project, ids[2])
        assert chain[-1] == ids[2]
        assert ids[3] not in chain

    def test_unknown_node(self):
        project, _ = linear_project(1)
        with pytest.raises(NotFound):
            assemble_quick(project, "ghost")


class TestEnumerateChoices:
    def test_sorted_by_votes_and_capped(self):
        project, ids = linear_project(1)
        parent = ids[1]
        votes = (2, 3, 1, 0)
        children = [add_node(project, parent, votes=v, brief=f"c{v}") for v in votes]
        out = enumerate_choices(project, parent)
        assert [c.votes for c in out] == [3, 2, 1]
        assert out[0].id == children[1]
        assert len(out) == 3

    def test_single_child(self):
        project, ids = linear_project(2)
        out = enumerate_choices(project, ids[1])
        assert len(out) == 1
        assert out[0].id == ids[2]

    def test_stub_ties_keep_creation_order(self):
        project, ids = linear_project(1)
        parent = ids[1]
        first = add_stub(project, parent, votes=1, rationale="first stub")
        second = add_stub(project, parent, votes=1, rationale="second stub")
        out = enumerate_choices(project, parent)
        assert [c.id for c in out] == [first, second]
        assert out[0].reason == "first stub"
        assert out[0].kind == "stub"

    def test_votes_non_increasing_property(self):
        rng = random.Random(7)
        for _ in range(50):
            project, ids = linear_project(1)
            parent = ids[1]
            for _ in range(rng.randint(0, 6)):
                if rng.random() < 0.5:
                    add_node(project, parent, votes=rng.randint(0, 5))
                else:
                    add_stub(project, parent, votes=rng.randint(0, 5))
            out = enumerate_choices(project, parent, top_k=rng.randint(1, 5))
            assert all(x.votes >= y.votes for x, y in zip(out, out[1:]))


class TestExtendStep:
    def test_existing_child_no_llm_call(self):
        class Exploding:
            def complete(self, request):  # pragma: no cover
                raise AssertionError("no call expected")

        project, ids = linear_project(2)
        project.active_chain = [ROOT_ID, ids[1]]
        engine = AgentEngine(Exploding(), templates=load_templates())
        chosen = extend_step(project, ids[1], ids[2], engine)
        assert chosen == ids[2]
        assert project.active_chain == [ROOT_ID, ids[1], ids[2]]

    def test_stub_materialized_with_scripted_writer(self):
        project, ids = linear_project(1)
        stub = add_stub(
            project, ids[1], action=ActionType.WRITE_CODE_EXPLANATION,
            target=CodeRange(3, 3), votes=2,
        )
        before = set(project.tree.nodes)
        new_id = extend_step(project, ids[1], stub, ops_engine())
        assert stub not in project.tree.stubs
        node = project.tree.node(new_id)
        assert node.origin is NodeOrigin.AGENT
        assert node.paragraph == "expanded"
        assert node.anchor.resolved == CodeRange(3, 3)
        assert set(project.tree.nodes) == before | {new_id}
        assert project.active_chain[-1] == new_id

    def test_stub_retained_on_gateway_error(self):
        class Failing:
            def complete(self, request):
                raise TransportError("down", attempts=1)

        project, ids = linear_project(1)
        stub = add_stub(project, ids[1], action=ActionType.WRITE_SUMMARY)
        engine = AgentEngine(Failing(), templates=load_templates())
        before = dict(project.tree.nodes)
        with pytest.raises(TransportError):
            extend_step(project, ids[1], stub, engine)
        assert stub in project.tree.stubs
        assert project.tree.nodes == before

    def test_backtrack_then_extend_other_child(self):
        project, ids = linear_project(2)
        other = add_node(project, ids[1], paragraph="other branch")
        engine = ops_engine()
        extend_step(project, ids[1], ids[2], engine)
        assemble_quick(project, ids[1])  # backtrack
        extend_step(project, ids[1], other, engine)
        assert project.active_chain == [ROOT_ID, ids[1], other]
        assert ids[2] in project.tree.nodes  # old nodes intact


# ---------------------------------------------------------------------------
# Random operation sequences keep every invariant
# ---------------------------------------------------------------------------


def run_random_sequence(rng: random.Random, ops: int = 5) -> None:
    project, ids = linear_project(rng.randint(1, 4))
    engine = ops_engine()
    for node_id in list(project.tree.nodes):
        if rng.random() < 0.3 and node_id != ROOT_ID:
            add_stub(project, node_id, votes=rng.randint(0, 3))

    for _ in range(ops):
        node_pool = list(project.tree.nodes)
        op = rng.choice(("group", "split", "trim", "assemble", "extend"))
        before_nodes = dict(project.tree.nodes)
        before_chain = list(project.active_chain)
        created_by_op: set[str] = set()
        try:
            if op == "group":
                chain = project.active_chain
                if len(chain) >= 3:
                    start = rng.randrange(1, len(chain) - 1)
                    picked = chain[start : start + 2]
                else:
                    picked = [rng.choice(node_pool), rng.choice(node_pool)]
                group_nodes(project, picked, engine)
                created_by_op = set(project.tree.nodes) - set(before_nodes)
            elif op == "split":
                split_node(project, rng.choice(node_pool), engine)
                created_by_op = set(project.tree.nodes) - set(before_nodes)
            elif op == "trim":
                trim_node(project, rng.choice(node_pool))
            elif op == "assemble":
                assemble_quick(project, rng.choice(node_pool))
            else:
                anchor_id = rng.choice(node_pool)
                choices = enumerate_choices(project, anchor_id)
                if choices:
                    extend_step(project, anchor_id, rng.choice(choices).id, engine)
        except SproutError:
            assert project.tree.nodes == before_nodes
            assert project.active_chain == before_chain
        else:
            if op in ("group", "split"):
                # pre-existing nodes byte-identical (frozen values, same objects)
                for nid, node in before_nodes.items():
                    assert project.tree.nodes[nid] is node
        assert validate_tree(project.tree) == []
        assert chain_is_valid(project.tree, project.active_chain)


def test_random_op_sequences_preserve_invariants():
    rng = random.Random(2024)
    for _ in range(300):
        run_random_sequence(rng)
