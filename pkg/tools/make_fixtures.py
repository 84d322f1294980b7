#!/usr/bin/env python3
"""Regenerate the committed fixtures: scripted mock sessions, the labeled
corpus (10 entries, 138 paragraphs) and the three pipeline mock scripts.

Everything is deterministic; run from the repo root:

    python tools/make_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
CORPORA = ROOT / "corpora"

TWO_SUM = """\
def two_sum(nums, target):
    seen = {}
    for i, x in enumerate(nums):
        if target - x in seen:
            return [seen[target - x], i]
        seen[x] = i
    return []
"""

# paragraphs per corpus entry; totals 138 across 10 entries
ENTRY_COUNTS = [14, 14, 14, 14, 14, 14, 14, 14, 13, 13]
ENTRY_NAMES = [
    "running totals",
    "string reversal helpers",
    "interval bookkeeping",
    "queue drain loop",
    "matrix row sums",
    "token counting",
    "path joining",
    "priority lookup",
    "digit grouping",
    "window averages",
]


def write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def session_rules(steps, finish_at: int) -> list[dict]:
    """Plan + write rules for a linear scripted session. ``steps`` is a list
    of dicts with action / write_response / thought lines."""
    rules = []
    for i, step in enumerate(steps):
        rules.append(
            {"match": [f"contains {i} paragraph(s)."], "response": step["plan_response"]}
        )
    rules.append(
        {
            "match": [f"contains {finish_at} paragraph(s)."],
            "response": (
                "OBSERVATION: The tutorial covers everything it needs.\n"
                "THOUGHT 1:\nACTION: Finish\nRATIONALE: the tutorial is complete"
            ),
        }
    )
    for step in steps:
        rules.append({"match": step["write_match"], "response": step["write_response"]})
    return rules


def make_session_4step() -> dict:
    steps = [
        {
            "plan_response": (
                "OBSERVATION: A compact two_sum using a dictionary of seen values.\n"
                "THOUGHT 1:\nACTION: WriteTitle\nRATIONALE: every tutorial needs a name first\n"
                "THOUGHT 2:\nACTION: WriteBackground\nRATIONALE: explain the problem before the code\n"
                "THOUGHT 3:\nACTION: WriteCodeExplanation lines 1-7\nRATIONALE: walk through the whole function"
            ),
            "write_match": ["ACTION: WriteTitle"],
            "write_response": "TITLE: Two Sum with a Hash Map",
        },
        {
            "plan_response": (
                "OBSERVATION: The tutorial has a title; the reader still lacks context.\n"
                "THOUGHT 1:\nACTION: WriteBackground\nRATIONALE: the problem statement comes before details\n"
                "THOUGHT 2:\nACTION: WriteCodeExplanation lines 1-7\nRATIONALE: dive straight into the loop"
            ),
            "write_match": ["ACTION: WriteBackground"],
            "write_response": (
                "STEP: 1\n"
                "EXPLANATION: Given an array and a target, two_sum finds two indices whose values add up to the target. The classic trick is to remember every value seen so far in a dictionary.\n"
                "SUMMARY: the problem and the hash map idea"
            ),
        },
        {
            "plan_response": (
                "OBSERVATION: Background is in place; the code itself is unexplained.\n"
                "THOUGHT 1:\nACTION: WriteCodeExplanation lines 1-7\nRATIONALE: the loop is the heart of the function\n"
                "THOUGHT 2:\nACTION: WriteNotification\nRATIONALE: warn about duplicate values"
            ),
            "write_match": ["Target lines 1-7:"],
            "write_response": (
                "STEP: 2\n"
                "CODE:\n"
                "```\n"
                "    for i, x in enumerate(nums):\n"
                "        if target - x in seen:\n"
                "            return [seen[target - x], i]\n"
                "        seen[x] = i\n"
                "```\n"
                "EXPLANATION: The loop walks the array once. For each value it checks whether the complement target minus x was already seen; if so the answer is the stored index and the current one, otherwise the value is recorded.\n"
                "SUMMARY: one pass with complement lookups"
            ),
        },
        {
            "plan_response": (
                "OBSERVATION: Title, background and the core loop are covered.\n"
                "THOUGHT 1:\nACTION: WriteSummary\nRATIONALE: wrap up what the reader learned"
            ),
            "write_match": ["ACTION: WriteSummary"],
            "write_response": (
                "STEP: 3\n"
                "EXPLANATION: The dictionary turns a quadratic scan into a single pass: every lookup is constant time, so two_sum runs in linear time and linear space.\n"
                "SUMMARY: linear time thanks to the dictionary"
            ),
        },
    ]
    return {"seed": 0, "default": "VOTE: 1", "rules": session_rules(steps, finish_at=4)}


def make_session_all_actions() -> dict:
    steps = [
        {
            "plan_response": (
                "OBSERVATION: Fresh source, empty tutorial.\n"
                "THOUGHT 1:\nACTION: WriteTitle\nRATIONALE: start with a name"
            ),
            "write_match": ["ACTION: WriteTitle"],
            "write_response": "TITLE: Walking Through two_sum",
        },
        {
            "plan_response": (
                "OBSERVATION: Only the title exists.\n"
                "THOUGHT 1:\nACTION: WriteBackground\nRATIONALE: set the stage"
            ),
            "write_match": ["ACTION: WriteBackground"],
            "write_response": (
                "STEP: 1\n"
                "EXPLANATION: The two-sum problem asks for the indices of two numbers that add up to a target. A dictionary of previously seen values makes this a one-pass job.\n"
                "SUMMARY: problem statement and plan"
            ),
        },
        {
            "plan_response": (
                "OBSERVATION: Context done, code unexplained.\n"
                "THOUGHT 1:\nACTION: WriteCodeExplanation lines 1-2\nRATIONALE: start at the function head"
            ),
            "write_match": ["Target lines 1-2:"],
            "write_response": (
                "STEP: 2\n"
                "CODE:\n"
                "```\n"
                "def two_sum(nums, target):\n"
                "    seen = {}\n"
                "```\n"
                "EXPLANATION: The function takes the array and the target, and prepares an empty dictionary that will map each seen value to its index.\n"
                "SUMMARY: signature and the seen dictionary"
            ),
        },
        {
            "plan_response": (
                "OBSERVATION: The setup is explained; readers may misuse duplicates.\n"
                "THOUGHT 1:\nACTION: WriteNotification\nRATIONALE: call out the duplicate pitfall"
            ),
            "write_match": ["ACTION: WriteNotification"],
            "write_response": (
                "STEP: 3\n"
                "EXPLANATION: Note that storing seen values after the complement check is what makes duplicates safe: the current element can never match itself.\n"
                "SUMMARY: why duplicates cannot self-match"
            ),
        },
        {
            "plan_response": (
                "OBSERVATION: All content categories except the wrap-up are present.\n"
                "THOUGHT 1:\nACTION: WriteSummary\nRATIONALE: close the tutorial"
            ),
            "write_match": ["ACTION: WriteSummary"],
            "write_response": (
                "STEP: 4\n"
                "EXPLANATION: With one dictionary and one pass, two_sum finds the answer in linear time; remember the order of check and store.\n"
                "SUMMARY: recap of the approach"
            ),
        },
    ]
    return {"seed": 0, "default": "VOTE: 1", "rules": session_rules(steps, finish_at=5)}


def make_service_demo() -> dict:
    """The 4-step session plus intervention rules, for driving the live
    service (and the web client's integration test) fully offline."""
    session = make_session_4step()
    extra = [
        {
            "match": ["in one paragraph"],
            "response": (
                "STEP: 1\nCODE:\n```\n    seen = {}\n```\n"
                "EXPLANATION: The merged paragraph covers both former steps in one pass.\n"
                "SUMMARY: merged overview"
            ),
        },
        {
            "match": ["in the next multiple steps"],
            "response": (
                "STEP: 1\nEXPLANATION: First elaborated half.\nSUMMARY: first half\n"
                "STEP: 2\nEXPLANATION: Second elaborated half.\nSUMMARY: second half"
            ),
        },
        {
            "match": ["The next step should be to write for"],
            "response": (
                "STEP: 1\nCODE:\n```\n    seen = {}\n```\n"
                "EXPLANATION: The selected line prepares the lookup dictionary.\n"
                "SUMMARY: selection explained"
            ),
        },
        {
            "match": ["Rewrite that paragraph"],
            "response": "STEP: 1\nEXPLANATION: A refined wording.\nSUMMARY: refined brief",
        },
    ]
    return {
        "seed": 0,
        "default": "VOTE: 1",
        "rules": extra + session["rules"],
    }


def entry_source(index: int, count: int) -> tuple[str, list[tuple[int, int]]]:
    lines = [f"# corpus entry {index:02d}: {ENTRY_NAMES[index]}"]
    ranges = []
    for j in range(count):
        start = len(lines) + 1
        lines.append(f"def step_{index:02d}_{j:02d}(value):")
        lines.append(f"    return value + {index * 100 + j}")
        ranges.append((start, start + 1))
    return "\n".join(lines) + "\n", ranges


def make_corpus_and_mocks() -> None:
    CORPORA.mkdir(exist_ok=True)
    verbatim_rules: list[dict] = []
    omit_rules: list[dict] = []
    fabricate_rules: list[dict] = []
    for index, count in enumerate(ENTRY_COUNTS):
        source, ranges = entry_source(index, count)
        marker = f"# corpus entry {index:02d}"
        source_lines = source.splitlines()
        paragraphs = []
        for j, (start, end) in enumerate(ranges):
            paragraphs.append(
                {
                    "text": f"Step {j + 1} explains the helper that adds {index * 100 + j}.",
                    "truth": {"start": start, "end": end},
                }
            )
        write_json(
            CORPORA / f"entry{index:02d}.json",
            {"language": "python", "source": source, "paragraphs": paragraphs},
        )

        plan_rules = []
        for j, (start, end) in enumerate(ranges):
            plan_rules.append(
                {
                    "match": [marker, f"contains {j} paragraph(s)."],
                    "response": (
                        f"OBSERVATION: entry {index} step {j}\n"
                        f"THOUGHT 1:\nACTION: WriteCodeExplanation lines {start}-{end}\n"
                        f"RATIONALE: explain block {j}"
                    ),
                }
            )
        plan_rules.append(
            {
                "match": [marker, f"contains {count} paragraph(s)."],
                "response": (
                    f"OBSERVATION: entry {index} is fully explained\n"
                    "THOUGHT 1:\nACTION: Finish\nRATIONALE: done"
                ),
            }
        )
        verbatim_rules.extend(plan_rules)
        omit_rules.extend(plan_rules)
        fabricate_rules.extend(plan_rules)

        for j, (start, end) in enumerate(ranges):
            match = [marker, f"Target lines {start}-{end}:"]
            code = "\n".join(source_lines[start - 1 : end])
            verbatim_rules.append(
                {
                    "match": match,
                    "response": (
                        f"STEP: {j + 1}\nCODE:\n```\n{code}\n```\n"
                        f"EXPLANATION: Paragraph {j + 1} of entry {index} explains this block.\n"
                        f"SUMMARY: entry {index} block {j}"
                    ),
                }
            )
            omit_rules.append(
                {
                    "match": match,
                    "response": (
                        f"STEP: {j + 1}\n"
                        f"EXPLANATION: Paragraph {j + 1} of entry {index} explains this block.\n"
                        f"SUMMARY: entry {index} block {j}"
                    ),
                }
            )
            fabricate_rules.append(
                {
                    "match": match,
                    "response": (
                        f"STEP: {j + 1}\nCODE:\n```\n"
                        f"imaginary_call_{index}_{j}()  # not in the source\n"
                        f"```\n"
                        f"EXPLANATION: Paragraph {j + 1} of entry {index} explains this block.\n"
                        f"SUMMARY: entry {index} block {j}"
                    ),
                }
            )

    write_json(FIXTURES / "verbatim.json", {"seed": 0, "default": "VOTE: 1", "rules": verbatim_rules})
    write_json(FIXTURES / "omit_code.json", {"seed": 0, "default": "VOTE: 1", "rules": omit_rules})
    write_json(FIXTURES / "fabricate.json", {"seed": 0, "default": "VOTE: 1", "rules": fabricate_rules})


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    (FIXTURES / "two_sum.py").write_text(TWO_SUM, encoding="utf-8")
    write_json(FIXTURES / "session_4step.json", make_session_4step())
    write_json(FIXTURES / "session_all_actions.json", make_session_all_actions())
    write_json(FIXTURES / "service_demo.json", make_service_demo())
    make_corpus_and_mocks()
    total = sum(ENTRY_COUNTS)
    print(f"wrote fixtures for {len(ENTRY_COUNTS)} corpus entries, {total} paragraphs")


if __name__ == "__main__":
    main()
