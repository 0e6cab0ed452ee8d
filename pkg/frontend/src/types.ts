// Mirrors the run service's wire schemas. The console renders exactly what
// the snapshot says: no client-side inference of node statuses.

export const SNAPSHOT_FORMAT = "plan-snapshot/1";

export type NodeType = "UNKNOWN" | "AND" | "OR" | "ACTION";
export type NodeStatus =
  | "UNVISITED"
  | "VISITED"
  | "SUCCESS"
  | "FAIL"
  | "PRUNED"
  | "DELETED";

export interface NodeRecord {
  id: string;
  type: NodeType;
  status: NodeStatus;
  description: string;
  score: number | null;
  action: string;
  url: string;
  reasoning: string;
  children: string[];
  depth: number;
  ordered: boolean;
  execution_count: number;
  retry_count: number;
  revision_count: number;
  notes: string[];
}

export interface StackEntry {
  node_id: string;
  state: "ENTERING" | "EXITING" | "FAILED";
}

export interface MemoryRow {
  row_id: string;
  attributes: Record<string, string>;
  constraints_not_met: string[];
  status: string;
  comment: string;
}

export interface MemoryTable {
  item_type: string;
  constraints: string[];
  schema: string[];
  rows: MemoryRow[];
}

export interface Snapshot {
  format: string;
  root_id: string;
  nodes: NodeRecord[];
  stack: StackEntry[]; // top-first
  memory: { tables: MemoryTable[] };
  state: "created" | "running" | "paused" | "finished";
  outcome: string | null;
  iterations: number;
  steps: number;
  seq: number;
}

export interface RunStatus {
  state: string;
  outcome: string | null;
  iterations: number;
  steps: number;
  seq: number;
}

export interface TrajectoryEvent {
  seq: number;
  event: string;
  [key: string]: unknown;
}

export interface EventsResponse {
  events: TrajectoryEvent[];
  last_seq: number;
}

export type InterventionKind = "inject_children" | "prune" | "pause" | "resume";

export interface InterventionForm {
  kind: InterventionKind;
  node_id: string;
  descriptions: string[];
  after_iteration?: number;
}

export interface InterventionAck {
  accepted: boolean;
  reason: string;
}

export interface RunResult {
  outcome: string;
  final_response: string;
  trajectory: { observation_summary: string; action: string; ok: boolean }[];
  iterations: number;
  steps: number;
  notes: string[];
}
