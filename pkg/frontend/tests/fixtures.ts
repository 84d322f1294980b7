/** Synthetic snapshot and event-log builders shaped exactly like the wire. */

import type {
  AnchorDict,
  NodeDict,
  ProjectSnapshot,
  ServerMessage,
} from "../src/types.js";

export const SOURCE_TEXT = "def f(a):\n    total = a + 1\n    return total\n";

export function anchor(start: number, end: number): AnchorDict {
  return {
    step_number: 1,
    quoted_code: "    total = a + 1",
    resolved: { start_line: start, end_line: end },
    status: "Resolved",
    explanation: "explains the middle line",
    summary: "middle line",
    ambiguous: false,
  };
}

export function node(
  id: string,
  parent: string,
  seq: number,
  overrides: Partial<NodeDict> = {},
): NodeDict {
  return {
    id,
    parent,
    action: "WriteBackground",
    paragraph: `paragraph of ${id}`,
    brief: `brief of ${id}`,
    anchor: null,
    incoming_votes: 0,
    incoming_reason: `reason for ${id}`,
    origin: "Agent",
    seq,
    ...overrides,
  };
}

export function snapshotProject(): ProjectSnapshot {
  const n1 = node("n1", "root", 1, { action: "WriteTitle", paragraph: "A Title", brief: "A Title" });
  const n2 = node("n2", "n1", 2);
  const n3 = node("n3", "n2", 3, {
    action: "WriteCodeExplanation",
    anchor: anchor(2, 3),
    incoming_votes: 2,
  });
  const n4 = node("n4", "n2", 4, { origin: "Refine", incoming_votes: 1 });
  return {
    schema_version: 1,
    id: "fixture",
    seed: 0,
    source: { language: "python", text: SOURCE_TEXT },
    tree: {
      root: "root",
      nodes: {
        root: node("root", "", 0, { parent: null, action: null, paragraph: "", brief: "" }),
        n1,
        n2,
        n3,
        n4,
      },
      stubs: {
        n5: {
          id: "n5",
          parent: "n2",
          action: "WriteNotification",
          rationale: "warn about something",
          target: null,
          votes: 3,
          seq: 5,
        },
      },
    },
    active_chain: ["root", "n1", "n2", "n3"],
    steps: [],
    config: {},
    embedding_cache: {},
    next_id: 6,
  };
}

export function recordedLog(): ServerMessage[] {
  const created = node("n6", "n3", 6, {
    action: "WriteSummary",
    paragraph: "the wrap-up",
    brief: "wrap-up",
    incoming_votes: 2,
  });
  return [
    { kind: "Snapshot", data: { seq: 4, project: snapshotProject() } },
    { kind: "StepStarted", data: { seq: 5, payload: { step_index: 1 } } },
    {
      kind: "Observation",
      data: { seq: 6, payload: { step_index: 1, text: "looks nearly finished" } },
    },
    {
      kind: "ThoughtsProposed",
      data: {
        seq: 7,
        payload: {
          step_index: 1,
          thoughts: [
            { action: "WriteSummary", rationale: "wrap it up", target: null },
            { action: "WriteNotification", rationale: "warn instead", target: null },
          ],
        },
      },
    },
    {
      kind: "Votes",
      data: { seq: 8, payload: { step_index: 1, votes: [2, 1], chosen_index: 0 } },
    },
    {
      kind: "NodeCreated",
      data: { seq: 9, payload: { step_index: 1, node: created } },
    },
    { kind: "Finished", data: { seq: 10, payload: { reason: "finish" } } },
  ];
}
