/** Client state: a pure reducer over the Snapshot + event stream.
 *
 * The server is the single source of truth. No command mutates state
 * locally; every change arrives as an event (or a fresh Snapshot after a
 * reconnect), so replaying the same log always rebuilds the same state.
 */

import type { NodeDict, ProjectSnapshot, ServerMessage, TreeDict } from "./types.js";

export interface ActivityEntry {
  seq: number;
  kind: string;
  text: string;
}

export interface AppState {
  project: ProjectSnapshot | null;
  seq: number;
  running: boolean;
  paused: boolean;
  lastError: string | null;
  activity: ActivityEntry[];
}

export function initialState(): AppState {
  return {
    project: null,
    seq: 0,
    running: false,
    paused: false,
    lastError: null,
    activity: [],
  };
}

function describe(kind: string, payload: Record<string, unknown>): string {
  switch (kind) {
    case "StepStarted":
      return `step ${payload.step_index} started`;
    case "Observation":
      return String(payload.text ?? "");
    case "ThoughtsProposed": {
      const thoughts = (payload.thoughts as { action: string }[]) ?? [];
      return thoughts.map((t) => t.action).join(", ");
    }
    case "Votes": {
      const votes = (payload.votes as number[]) ?? [];
      return `votes ${votes.join("/")} -> #${(payload.chosen_index as number) + 1}`;
    }
    case "NodeCreated": {
      const node = payload.node as NodeDict | undefined;
      return node ? `${node.action}: ${node.brief}` : "";
    }
    case "AnchorResolved": {
      const anchor = payload.anchor as { status?: string } | undefined;
      return `anchor ${anchor?.status ?? ""}`;
    }
    case "Error":
      return String(payload.message ?? "");
    default:
      return "";
  }
}

function withNode(tree: TreeDict, node: NodeDict): TreeDict {
  return { ...tree, nodes: { ...tree.nodes, [node.id]: node } };
}

/** Apply one server message; returns a new state, never mutates. */
export function applyServerMessage(state: AppState, message: ServerMessage): AppState {
  const { kind, data } = message;
  if (kind === "Snapshot") {
    return {
      ...initialState(),
      project: data.project as ProjectSnapshot,
      seq: (data.seq as number) ?? 0,
    };
  }

  const seq = (data.seq as number) ?? state.seq + 1;
  const payload = (data.payload as Record<string, unknown>) ?? {};
  let next: AppState = { ...state, seq };

  const text = describe(kind, payload);
  next.activity = [...state.activity, { seq, kind, text }].slice(-200);

  switch (kind) {
    case "StepStarted":
      next.running = true;
      next.paused = false;
      break;
    case "NodeCreated": {
      const node = payload.node as NodeDict;
      if (next.project && node) {
        const chain = next.project.active_chain;
        const extended =
          chain.length > 0 && chain[chain.length - 1] === node.parent
            ? [...chain, node.id]
            : chain;
        next.project = {
          ...next.project,
          tree: withNode(next.project.tree, node),
          active_chain: extended,
        };
      }
      break;
    }
    case "AnchorResolved": {
      const nodeId = payload.node_id as string;
      const anchor = payload.anchor as NodeDict["anchor"];
      const existing = next.project?.tree.nodes[nodeId];
      if (next.project && existing) {
        next.project = {
          ...next.project,
          tree: withNode(next.project.tree, { ...existing, anchor }),
        };
      }
      break;
    }
    case "ChainChanged": {
      if (next.project) {
        next.project = {
          ...next.project,
          tree: (payload.tree as TreeDict) ?? next.project.tree,
          active_chain: (payload.chain as string[]) ?? next.project.active_chain,
        };
      }
      break;
    }
    case "Paused":
      next.running = false;
      next.paused = true;
      break;
    case "Finished":
      next.running = false;
      break;
    case "Error":
      next.running = false;
      next.lastError = String(payload.message ?? "unknown error");
      break;
    default:
      break;
  }
  return next;
}

/** Fold a whole recorded log (Snapshot first) into a state. */
export function replayLog(messages: ServerMessage[]): AppState {
  let state = initialState();
  for (const message of messages) {
    state = applyServerMessage(state, message);
  }
  return state;
}
