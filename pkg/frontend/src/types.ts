/** Wire types of the sprout service, snake_case exactly as served. */

export interface CodeRangeDict {
  start_line: number;
  end_line: number;
}

export interface AnchorDict {
  step_number: number;
  quoted_code: string;
  resolved: CodeRangeDict | null;
  status: "Resolved" | "NoCode" | "ContentMismatch" | "Ambiguous";
  explanation: string;
  summary: string;
  ambiguous: boolean;
}

export type ActionName =
  | "WriteTitle"
  | "WriteBackground"
  | "WriteCodeExplanation"
  | "WriteNotification"
  | "WriteSummary"
  | "Finish";

export type OriginName = "Agent" | "UserDefined" | "Group" | "Split" | "Refine";

export interface NodeDict {
  id: string;
  parent: string | null;
  action: ActionName | null;
  paragraph: string;
  brief: string;
  anchor: AnchorDict | null;
  incoming_votes: number;
  incoming_reason: string;
  origin: OriginName;
  seq: number;
}

export interface StubDict {
  id: string;
  parent: string;
  action: ActionName;
  rationale: string;
  target: CodeRangeDict | null;
  votes: number;
  seq: number;
}

export interface TreeDict {
  root: string;
  nodes: Record<string, NodeDict>;
  stubs: Record<string, StubDict>;
}

export interface SourceDict {
  language: string;
  text: string;
}

export interface ThoughtDict {
  action: ActionName;
  rationale: string;
  target: CodeRangeDict | null;
  votes: number;
}

export interface StepDict {
  step_index: number;
  observation: string;
  thoughts: ThoughtDict[];
  chosen_index: number;
  produced_node: string | null;
}

export interface ProjectSnapshot {
  schema_version: number;
  id: string;
  seed: number;
  source: SourceDict | null;
  tree: TreeDict;
  active_chain: string[];
  steps: StepDict[];
  config: Record<string, unknown>;
  embedding_cache: Record<string, number[]>;
  next_id: number;
}

/** One SSE frame: `event:` is the kind, `data:` the JSON body. */
export interface ServerMessage {
  kind: string;
  data: Record<string, unknown>;
}

export interface NodeSpacePointDict {
  node_id: string;
  x: number;
  y: number;
  intent: { action: ActionName; target: CodeRangeDict | null };
  origin: OriginName;
}

export interface NodeSpacePayload {
  points: NodeSpacePointDict[];
  stale: boolean;
}

export interface ChoiceDict {
  id: string;
  kind: "node" | "stub";
  action: ActionName;
  votes: number;
  reason: string;
  label: string;
}

export interface ServiceError {
  code: string;
  message: string;
  detail: Record<string, unknown>;
}
