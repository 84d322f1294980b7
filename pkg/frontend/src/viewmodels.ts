/** The six coordinated views, derived as pure data from (project snapshot,
 * local view state, last node-space payload). No DOM, no fetches: the same
 * inputs always produce deep-equal view models, which is what makes the
 * replay test meaningful.
 */

import type {
  ActionName,
  ChoiceDict,
  NodeDict,
  NodeSpacePayload,
  OriginName,
  ProjectSnapshot,
} from "./types.js";

/** Okabe-Ito hues: five distinct, colorblind-safe origin colors. */
export const ORIGIN_COLORS: Record<OriginName, string> = {
  Agent: "#0072B2",
  UserDefined: "#E69F00",
  Group: "#009E73",
  Split: "#CC79A7",
  Refine: "#56B4E9",
};

export const DETAIL_OPTIONS = ["Shorter", "Longer"] as const;
export const DEFAULT_STYLES = [
  "formal",
  "conversational",
  "beginner-friendly",
  "concise-technical",
];

const EDGE_WIDTH_FLOOR = 2;
const EDGE_WIDTH_PER_VOTE = 2;

/** Linear vote-to-stroke mapping with a 2px floor. */
export function edgeWidth(votes: number): number {
  return EDGE_WIDTH_FLOOR + EDGE_WIDTH_PER_VOTE * Math.max(0, votes);
}

export interface ViewState {
  focusedNode: string | null;
  hoveredNode: string | null;
  brushSelection: { start: number; end: number } | null;
  branchCursor: string | null;
  pendingOperation: string | null;
  autoFollow: boolean;
}

export function initialViewState(): ViewState {
  return {
    focusedNode: null,
    hoveredNode: null,
    brushSelection: null,
    branchCursor: null,
    pendingOperation: null,
    autoFollow: true,
  };
}

/** The focused node auto-follows the newest generated node while watching. */
export function autoFollowFocus(
  view: ViewState,
  messageKind: string,
  payload: Record<string, unknown>,
): ViewState {
  if (!view.autoFollow || messageKind !== "NodeCreated") {
    return view;
  }
  const node = payload.node as NodeDict | undefined;
  if (!node) {
    return view;
  }
  return { ...view, focusedNode: node.id, branchCursor: node.id };
}

// -- view model shapes ------------------------------------------------------

export interface CodeLineVM {
  number: number;
  text: string;
  highlighted: boolean;
  brushed: boolean;
}

export interface CodeViewModel {
  language: string;
  lines: CodeLineVM[];
  hasSelection: boolean;
}

export interface TutorialBlockVM {
  nodeId: string;
  brief: string;
  paragraph: string;
  anchor: { start: number; end: number } | null;
  focused: boolean;
  hovered: boolean;
}

export interface ChainNodeVM {
  nodeId: string;
  brief: string;
  action: ActionName | null;
  anchored: boolean;
  pulsing: boolean;
}

export interface OutlineNodeVM {
  nodeId: string;
  parent: string | null;
  depth: number;
  brief: string;
  action: ActionName | null;
  origin: OriginName;
  color: string;
  onActiveChain: boolean;
  isCursor: boolean;
  selected: boolean;
}

export interface BranchChoiceVM {
  id: string;
  kind: "node" | "stub";
  action: ActionName;
  votes: number;
  reason: string;
  label: string;
  edgeWidth: number;
}

export interface NodeSpacePointVM {
  nodeId: string;
  x: number;
  y: number;
  origin: OriginName;
  color: string;
  sameIntentAsFocused: boolean;
}

export interface ViewModels {
  code: CodeViewModel;
  tutorial: TutorialBlockVM[];
  chain: ChainNodeVM[];
  outline: { nodes: OutlineNodeVM[]; legend: Record<OriginName, string> };
  branches: { cursor: string | null; choices: BranchChoiceVM[] };
  nodeSpace: {
    points: NodeSpacePointVM[];
    stale: boolean;
    styles: string[];
    detailOptions: readonly string[];
  };
}

// -- derivations ------------------------------------------------------------

/** The line numbers an anchored node highlights (empty when unresolved). */
export function highlightLines(project: ProjectSnapshot | null, nodeId: string | null): number[] {
  if (!project || !nodeId) {
    return [];
  }
  const node = project.tree.nodes[nodeId];
  const resolved = node?.anchor?.resolved;
  if (!resolved) {
    return [];
  }
  const lines: number[] = [];
  for (let n = resolved.start_line; n <= resolved.end_line; n += 1) {
    lines.push(n);
  }
  return lines;
}

function intentOf(node: NodeDict): string {
  const target = node.anchor?.resolved;
  return `${node.action}:${target ? `${target.start_line}-${target.end_line}` : "-"}`;
}

function nodesInSeqOrder(project: ProjectSnapshot): NodeDict[] {
  return Object.values(project.tree.nodes).sort((a, b) => a.seq - b.seq);
}

function depthOf(project: ProjectSnapshot, nodeId: string): number {
  let depth = 0;
  let current = project.tree.nodes[nodeId];
  while (current && current.parent !== null) {
    depth += 1;
    current = project.tree.nodes[current.parent];
    if (depth > Object.keys(project.tree.nodes).length) {
      break; // defensive: malformed snapshots must not hang the UI
    }
  }
  return depth;
}

/** Children + unexpanded stubs below a node: most votes first, creation
 * order on ties, capped at three (mirrors the service's choice ranking). */
export function branchChoices(project: ProjectSnapshot, cursor: string): BranchChoiceVM[] {
  const entries: (BranchChoiceVM & { seq: number })[] = [];
  for (const node of Object.values(project.tree.nodes)) {
    if (node.parent === cursor) {
      entries.push({
        id: node.id,
        kind: "node",
        action: node.action ?? "Finish",
        votes: node.incoming_votes,
        reason: node.incoming_reason,
        label: node.brief,
        edgeWidth: edgeWidth(node.incoming_votes),
        seq: node.seq,
      });
    }
  }
  for (const stub of Object.values(project.tree.stubs)) {
    if (stub.parent === cursor) {
      entries.push({
        id: stub.id,
        kind: "stub",
        action: stub.action,
        votes: stub.votes,
        reason: stub.rationale,
        label: "",
        edgeWidth: edgeWidth(stub.votes),
        seq: stub.seq,
      });
    }
  }
  entries.sort((a, b) => b.votes - a.votes || a.seq - b.seq);
  return entries.slice(0, 3).map(({ seq: _seq, ...vm }) => vm);
}

export function buildViewModels(
  project: ProjectSnapshot | null,
  view: ViewState,
  nodeSpace: NodeSpacePayload | null = null,
): ViewModels {
  const legend = { ...ORIGIN_COLORS };
  if (!project) {
    return {
      code: { language: "", lines: [], hasSelection: false },
      tutorial: [],
      chain: [],
      outline: { nodes: [], legend },
      branches: { cursor: null, choices: [] },
      nodeSpace: { points: [], stale: false, styles: DEFAULT_STYLES, detailOptions: DETAIL_OPTIONS },
    };
  }

  const attention = view.hoveredNode ?? view.focusedNode;
  const highlighted = new Set(highlightLines(project, attention));
  const brushed = view.brushSelection;
  const sourceLines = project.source ? project.source.text.split("\n") : [];
  if (sourceLines.length > 0 && sourceLines[sourceLines.length - 1] === "") {
    sourceLines.pop(); // a trailing newline does not add a final empty line
  }
  const code: CodeViewModel = {
    language: project.source?.language ?? "",
    lines: sourceLines.map((text, index) => {
      const lineNumber = index + 1;
      return {
        number: lineNumber,
        text,
        highlighted: highlighted.has(lineNumber),
        brushed: brushed !== null && lineNumber >= brushed.start && lineNumber <= brushed.end,
      };
    }),
    hasSelection: brushed !== null,
  };

  const chainIds = project.active_chain.slice(1);
  const tutorial: TutorialBlockVM[] = [];
  const chain: ChainNodeVM[] = [];
  for (const nodeId of chainIds) {
    const node = project.tree.nodes[nodeId];
    if (!node) {
      continue;
    }
    const resolved = node.anchor?.resolved ?? null;
    tutorial.push({
      nodeId,
      brief: node.brief,
      paragraph: node.paragraph,
      anchor: resolved ? { start: resolved.start_line, end: resolved.end_line } : null,
      focused: view.focusedNode === nodeId,
      hovered: view.hoveredNode === nodeId,
    });
    chain.push({
      nodeId,
      brief: node.brief,
      action: node.action,
      anchored: resolved !== null,
      pulsing: attention === nodeId,
    });
  }

  const activeSet = new Set(project.active_chain);
  const outlineNodes: OutlineNodeVM[] = nodesInSeqOrder(project)
    .filter((node) => node.parent !== null)
    .map((node) => ({
      nodeId: node.id,
      parent: node.parent,
      depth: depthOf(project, node.id),
      brief: node.brief,
      action: node.action,
      origin: node.origin,
      color: ORIGIN_COLORS[node.origin],
      onActiveChain: activeSet.has(node.id),
      isCursor: view.branchCursor === node.id,
      selected: view.focusedNode === node.id,
    }));

  const cursor =
    view.branchCursor ?? project.active_chain[project.active_chain.length - 1] ?? null;
  const choices = cursor ? branchChoices(project, cursor) : [];

  const focused = view.focusedNode ? project.tree.nodes[view.focusedNode] : undefined;
  const focusedIntent = focused ? intentOf(focused) : null;
  const points: NodeSpacePointVM[] = (nodeSpace?.points ?? []).map((point) => {
    const node = project.tree.nodes[point.node_id];
    return {
      nodeId: point.node_id,
      x: point.x,
      y: point.y,
      origin: point.origin,
      color: ORIGIN_COLORS[point.origin],
      sameIntentAsFocused:
        focusedIntent !== null && node !== undefined && intentOf(node) === focusedIntent,
    };
  });

  const configuredStyles = (project.config as { refine?: { styles?: string[] } }).refine?.styles;
  return {
    code,
    tutorial,
    chain,
    outline: { nodes: outlineNodes, legend },
    branches: { cursor, choices },
    nodeSpace: {
      points,
      stale: nodeSpace?.stale ?? false,
      styles: configuredStyles && configuredStyles.length > 0 ? configuredStyles : DEFAULT_STYLES,
      detailOptions: DETAIL_OPTIONS,
    },
  };
}
