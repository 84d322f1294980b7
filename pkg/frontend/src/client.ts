/** REST command client and SSE subscription for the sprout service.
 *
 * Commands never update client state; state only moves on events from the
 * subscription (or the Snapshot a reconnect brings back).
 */

import type {
  ChoiceDict,
  NodeSpacePayload,
  ProjectSnapshot,
  ServerMessage,
  ServiceError,
} from "./types.js";

export class SproutApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(status: number, body: ServiceError) {
    super(body.message);
    this.code = body.code;
    this.status = status;
  }
}

async function parseError(response: Response): Promise<SproutApiError> {
  let body: ServiceError = { code: "Unknown", message: response.statusText, detail: {} };
  try {
    body = (await response.json()) as ServiceError;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new SproutApiError(response.status, body);
}

export interface SubscriptionHandle {
  close(): void;
}

export class SproutClient {
  constructor(readonly baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      throw await parseError(response);
    }
    const contentType = response.headers.get("content-type") ?? "";
    if (contentType.includes("application/json")) {
      return (await response.json()) as T;
    }
    return (await response.text()) as unknown as T;
  }

  createProject(body: {
    id?: string;
    language?: string;
    source?: string;
    seed?: number;
  }): Promise<ProjectSnapshot> {
    return this.request("POST", "/projects", body);
  }

  getProject(projectId: string): Promise<ProjectSnapshot> {
    return this.request("GET", `/projects/${projectId}`);
  }

  putSource(projectId: string, language: string, text: string): Promise<ProjectSnapshot> {
    return this.request("PUT", `/projects/${projectId}/source`, { language, text });
  }

  startAutopilot(
    projectId: string,
    budget: { max_steps?: number; candidates_per_step?: number; votes_per_step?: number } = {},
  ): Promise<{ running: boolean }> {
    return this.request("POST", `/projects/${projectId}/autopilot`, budget);
  }

  pause(projectId: string): Promise<{ paused: boolean }> {
    return this.request("POST", `/projects/${projectId}/pause`, {});
  }

  generateForSelection(
    projectId: string,
    start: number,
    end: number,
  ): Promise<{ node_id: string; project: ProjectSnapshot }> {
    return this.request("POST", `/projects/${projectId}/generate-for-selection`, { start, end });
  }

  group(projectId: string, nodeIds: string[]): Promise<{ new_nodes: string[] }> {
    return this.request("POST", `/projects/${projectId}/nodes/group`, { node_ids: nodeIds });
  }

  split(projectId: string, nodeId: string): Promise<{ new_nodes: string[] }> {
    return this.request("POST", `/projects/${projectId}/nodes/split`, { node_id: nodeId });
  }

  trim(projectId: string, nodeId: string): Promise<{ removed: number }> {
    return this.request("POST", `/projects/${projectId}/nodes/trim`, { node_id: nodeId });
  }

  assemble(projectId: string, nodeId: string): Promise<{ chain: string[] }> {
    return this.request("POST", `/projects/${projectId}/chain/assemble`, { node_id: nodeId });
  }

  choices(projectId: string, nodeId: string): Promise<{ choices: ChoiceDict[] }> {
    return this.request("GET", `/projects/${projectId}/choices/${nodeId}`);
  }

  extend(projectId: string, nodeId: string, choice: string): Promise<{ node_id: string }> {
    return this.request("POST", `/projects/${projectId}/chain/extend`, {
      node_id: nodeId,
      choice,
    });
  }

  nodeSpace(projectId: string): Promise<NodeSpacePayload> {
    return this.request("GET", `/projects/${projectId}/node-space`);
  }

  refine(
    projectId: string,
    nodeId: string,
    spec: { style?: string; detail?: string; custom_prompt?: string },
  ): Promise<{ node_id: string }> {
    return this.request("POST", `/projects/${projectId}/nodes/${nodeId}/refine`, spec);
  }

  adopt(projectId: string, nodeId: string, alternativeId: string): Promise<{ chain: string[] }> {
    return this.request("POST", `/projects/${projectId}/nodes/${nodeId}/adopt`, {
      alternative_id: alternativeId,
    });
  }

  exportMarkdown(projectId: string): Promise<string> {
    return this.request("GET", `/projects/${projectId}/export.md`);
  }

  /**
   * Subscribe to the project's event stream. Parses SSE frames from a
   * streaming fetch; on any drop it resubscribes after a short delay and the
   * server's fresh Snapshot resynchronizes the reducer.
   */
  subscribeEvents(
    projectId: string,
    onMessage: (message: ServerMessage) => void,
    options: { reconnectDelayMs?: number } = {},
  ): SubscriptionHandle {
    const delay = options.reconnectDelayMs ?? 250;
    let closed = false;
    let controller: AbortController | null = null;

    const pump = async (): Promise<void> => {
      while (!closed) {
        controller = new AbortController();
        try {
          const response = await fetch(`${this.baseUrl}/projects/${projectId}/events`, {
            signal: controller.signal,
          });
          if (!response.ok || response.body === null) {
            throw await parseError(response);
          }
          const reader = response.body.getReader();
          const decoder = new TextDecoder();
          let buffer = "";
          for (;;) {
            const { value, done } = await reader.read();
            if (done) {
              break;
            }
            buffer += decoder.decode(value, { stream: true });
            let boundary = buffer.indexOf("\n\n");
            while (boundary !== -1) {
              const frame = buffer.slice(0, boundary);
              buffer = buffer.slice(boundary + 2);
              const message = parseSseFrame(frame);
              if (message) {
                onMessage(message);
              }
              boundary = buffer.indexOf("\n\n");
            }
          }
        } catch {
          // fall through to reconnect
        }
        if (!closed) {
          await new Promise((resolve) => setTimeout(resolve, delay));
        }
      }
    };
    void pump();

    return {
      close(): void {
        closed = true;
        controller?.abort();
      },
    };
  }
}

export function parseSseFrame(frame: string): ServerMessage | null {
  let kind = "";
  const dataLines: string[] = [];
  for (const line of frame.split("\n")) {
    if (line.startsWith("event:")) {
      kind = line.slice("event:".length).trim();
    } else if (line.startsWith("data:")) {
      dataLines.push(line.slice("data:".length).trim());
    }
  }
  if (!kind || dataLines.length === 0) {
    return null;
  }
  try {
    return { kind, data: JSON.parse(dataLines.join("\n")) as Record<string, unknown> };
  } catch {
    return null;
  }
}
