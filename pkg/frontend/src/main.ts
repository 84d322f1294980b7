/** Browser entry: one project, one SSE subscription, re-render per event. */

import { SproutClient } from "./client.js";
import { render } from "./dom.js";
import { applyServerMessage, initialState, type AppState } from "./state.js";
import {
  autoFollowFocus,
  buildViewModels,
  initialViewState,
  type ViewState,
} from "./viewmodels.js";
import type { NodeSpacePayload, ServerMessage } from "./types.js";

const DEFAULT_SOURCE = `def two_sum(nums, target):
    seen = {}
    for i, x in enumerate(nums):
        if target - x in seen:
            return [seen[target - x], i]
        seen[x] = i
    return []
`;

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) {
    throw new Error("missing #app element");
  }
  const client = new SproutClient(window.location.origin.replace(/\/$/, ""));

  let state: AppState = initialState();
  let view: ViewState = initialViewState();
  let nodeSpace: NodeSpacePayload | null = null;
  const groupPicks = new Set<string>();

  const params = new URLSearchParams(window.location.search);
  let projectId = params.get("project");
  if (!projectId) {
    const project = await client.createProject({
      language: "python",
      source: DEFAULT_SOURCE,
    });
    projectId = project.id;
    params.set("project", projectId);
    history.replaceState(null, "", `?${params.toString()}`);
  }
  const pid = projectId;

  const refreshNodeSpace = async (): Promise<void> => {
    try {
      nodeSpace = await client.nodeSpace(pid);
    } catch {
      nodeSpace = null;
    }
    paint();
  };

  const run = (work: Promise<unknown>): void => {
    work.then(
      () => void refreshNodeSpace(),
      (error) => {
        state = { ...state, lastError: String((error as Error).message ?? error) };
        paint();
      },
    );
  };

  const commands = {
    generate: () => run(client.startAutopilot(pid, {})),
    pause: () => run(client.pause(pid)),
    generateForSelection: (start: number, end: number) => {
      view = { ...view, brushSelection: null };
      run(client.generateForSelection(pid, start, end));
    },
    hoverBlock: (nodeId: string | null) => {
      view = { ...view, hoveredNode: nodeId };
      paint();
    },
    focusNode: (nodeId: string | null) => {
      view = { ...view, focusedNode: nodeId, autoFollow: nodeId === null };
      paint();
    },
    assemble: (nodeId: string) => run(client.assemble(pid, nodeId)),
    toggleGroupPick: (nodeId: string) => {
      if (!groupPicks.delete(nodeId)) {
        groupPicks.add(nodeId);
      }
      paint();
    },
    groupPicked: () => {
      const picked = [...groupPicks];
      groupPicks.clear();
      run(client.group(pid, picked));
    },
    split: (nodeId: string) => run(client.split(pid, nodeId)),
    trim: (nodeId: string) => run(client.trim(pid, nodeId)),
    setCursor: (nodeId: string) => {
      view = { ...view, branchCursor: nodeId };
      paint();
    },
    extend: (choiceId: string) => {
      const cursor = view.branchCursor ?? state.project?.active_chain.at(-1);
      if (cursor) {
        run(client.extend(pid, cursor, choiceId));
      }
    },
    refine: (spec: { style?: string; detail?: string; custom_prompt?: string }) => {
      if (view.focusedNode) {
        run(client.refine(pid, view.focusedNode, spec));
      }
    },
    adopt: (alternativeId: string) => {
      if (view.focusedNode && view.focusedNode !== alternativeId) {
        run(client.adopt(pid, view.focusedNode, alternativeId));
      }
    },
    brush: (start: number, end: number) => {
      view = { ...view, brushSelection: { start, end } };
      paint();
    },
    clearBrush: () => {
      view = { ...view, brushSelection: null };
      paint();
    },
  };

  function paint(): void {
    const vms = buildViewModels(state.project, view, nodeSpace);
    render(root!, vms, {
      running: state.running,
      paused: state.paused,
      lastError: state.lastError,
      groupPicks,
    }, commands);
  }

  client.subscribeEvents(pid, (message: ServerMessage) => {
    state = applyServerMessage(state, message);
    view = autoFollowFocus(
      view,
      message.kind,
      (message.data.payload as Record<string, unknown>) ?? {},
    );
    if (message.kind === "Finished" || message.kind === "Paused") {
      void refreshNodeSpace();
    }
    paint();
  });
  paint();
}

void boot();
