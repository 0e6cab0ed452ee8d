// Pure snapshot -> view translation. Every badge and status string comes
// verbatim from the snapshot; the console never derives its own statuses.

import {
  SNAPSHOT_FORMAT,
  type NodeRecord,
  type Snapshot,
  type StackEntry,
} from "./types.js";

export interface TreeRow {
  id: string;
  depth: number;
  typeBadge: string; // the snapshot's NodeType, verbatim
  statusBadge: string; // the snapshot's NodeStatus, verbatim
  description: string;
  score: number | null;
  action: string;
  onStack: boolean;
  struck: boolean; // DELETED nodes render struck-through
  interventionTarget: boolean; // open AND/OR nodes only
}

export interface SnapshotView {
  ok: boolean;
  banner: string | null; // set on schema-version mismatch
  state: string;
  outcome: string | null;
  rows: TreeRow[];
  stack: StackEntry[]; // top-first, as served
  stackLabel: string;
  memory: Snapshot["memory"];
  seq: number;
}

const CLOSED = new Set(["SUCCESS", "PRUNED", "DELETED"]);

export function buildView(snapshot: Snapshot): SnapshotView {
  if (snapshot.format !== SNAPSHOT_FORMAT) {
    return {
      ok: false,
      banner: `Unsupported snapshot format "${snapshot.format}"; showing raw data.`,
      state: snapshot.state ?? "unknown",
      outcome: snapshot.outcome ?? null,
      rows: [],
      stack: [],
      stackLabel: "",
      memory: { tables: [] },
      seq: snapshot.seq ?? 0,
    };
  }
  const byId = new Map(snapshot.nodes.map((n) => [n.id, n]));
  const onStack = new Set(snapshot.stack.map((e) => e.node_id));
  const rows: TreeRow[] = [];
  const walk = (id: string) => {
    const node = byId.get(id);
    if (!node) return;
    rows.push(toRow(node, onStack.has(node.id)));
    for (const child of node.children) walk(child);
  };
  walk(snapshot.root_id);
  const terminated = snapshot.state === "finished" && snapshot.stack.length === 0;
  return {
    ok: true,
    banner: null,
    state: snapshot.state,
    outcome: snapshot.outcome,
    rows,
    stack: snapshot.stack,
    stackLabel: terminated ? "terminated" : `${snapshot.stack.length} entries (top first)`,
    memory: snapshot.memory,
    seq: snapshot.seq,
  };
}

function toRow(node: NodeRecord, onStack: boolean): TreeRow {
  return {
    id: node.id,
    depth: node.depth,
    typeBadge: node.type,
    statusBadge: node.status,
    description: node.description,
    score: node.score,
    action: node.action,
    onStack,
    struck: node.status === "DELETED",
    interventionTarget:
      (node.type === "AND" || node.type === "OR") && !CLOSED.has(node.status),
  };
}

export function interventionTargets(view: SnapshotView): string[] {
  return view.rows.filter((r) => r.interventionTarget).map((r) => r.id);
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderTreeHtml(view: SnapshotView): string {
  if (!view.ok) {
    return `<div class="banner error">${escapeHtml(view.banner ?? "")}</div>`;
  }
  const rows = view.rows
    .map((row) => {
      const classes = ["node", `status-${row.statusBadge}`, `type-${row.typeBadge}`];
      if (row.struck) classes.push("struck");
      if (row.onStack) classes.push("on-stack");
      const score = row.score !== null ? `<span class="score">${row.score}</span>` : "";
      const action = row.action
        ? `<code class="action">${escapeHtml(row.action)}</code>`
        : "";
      return (
        `<li class="${classes.join(" ")}" data-id="${escapeHtml(row.id)}" ` +
        `style="margin-left:${row.depth * 16}px">` +
        `<span class="badge type">${row.typeBadge}</span>` +
        `<span class="badge status">${row.statusBadge}</span>` +
        `<span class="id">[${escapeHtml(row.id)}]</span> ` +
        `${escapeHtml(row.description)} ${score}${action}</li>`
      );
    })
    .join("\n");
  return `<ul class="tree">\n${rows}\n</ul>`;
}

export function renderStackHtml(view: SnapshotView): string {
  const header = `<div class="stack-label">${escapeHtml(view.stackLabel)}</div>`;
  if (!view.stack.length) return header;
  const items = view.stack
    .map(
      (entry) =>
        `<li><span class="badge state-${entry.state}">${entry.state}</span> ` +
        `${escapeHtml(entry.node_id)}</li>`,
    )
    .join("\n");
  return `${header}\n<ol class="stack">\n${items}\n</ol>`;
}

export function renderMemoryHtml(view: SnapshotView): string {
  if (!view.memory.tables.length) {
    return `<div class="memory empty">no candidate tables</div>`;
  }
  return view.memory.tables
    .map((table) => {
      const keys = table.schema;
      const head = ["row", ...keys, "unmet", "status"].map((k) => `<th>${escapeHtml(k)}</th>`);
      const body = table.rows
        .map((row) => {
          const cells = [
            `<td>${escapeHtml(row.row_id)}</td>`,
            ...keys.map((k) => `<td>${escapeHtml(row.attributes[k] ?? "")}</td>`),
            `<td>${escapeHtml(row.constraints_not_met.join(", "))}</td>`,
            `<td>${escapeHtml(row.status)}</td>`,
          ];
          return `<tr class="memory-status-${escapeHtml(row.status)}">${cells.join("")}</tr>`;
        })
        .join("\n");
      return (
        `<section class="memory-table"><h3>${escapeHtml(table.item_type)}</h3>` +
        `<table><thead><tr>${head.join("")}</tr></thead><tbody>${body}</tbody></table></section>`
      );
    })
    .join("\n");
}
