// Browser wiring: event-feed consumption with snapshot-polling fallback, and
// the intervention form. All state lives on the server; this file only paints.

import { RunApi } from "./api.js";
import { submitIntervention } from "./intervention.js";
import {
  buildView,
  interventionTargets,
  renderMemoryHtml,
  renderStackHtml,
  renderTreeHtml,
} from "./render.js";
import type { InterventionKind, TrajectoryEvent } from "./types.js";

const POLL_INTERVAL_MS = 1000;
const EVENT_INTERVAL_MS = 250;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function startConsole(baseUrl = ""): void {
  const api = new RunApi(baseUrl);
  let lastSeq = 0;
  let runState = "running";
  const eventLines: string[] = [];

  const refresh = async () => {
    const snapshot = await api.snapshot();
    runState = snapshot.state;
    const view = buildView(snapshot);
    el("state").textContent = view.outcome
      ? `${view.state} (${view.outcome})`
      : view.state;
    el("tree").innerHTML = renderTreeHtml(view);
    el("stack").innerHTML = renderStackHtml(view);
    el("memory").innerHTML = renderMemoryHtml(view);
    const targets = interventionTargets(view);
    const select = el<HTMLSelectElement>("target");
    const current = select.value;
    select.innerHTML = targets
      .map((id) => `<option value="${id}">${id}</option>`)
      .join("");
    if (targets.includes(current)) select.value = current;
  };

  const pullEvents = async () => {
    try {
      const batch = await api.events(lastSeq);
      if (batch.events.length) {
        lastSeq = batch.last_seq;
        batch.events.forEach((event: TrajectoryEvent) => {
          eventLines.push(`${event.seq} ${event.event} ${summarize(event)}`);
        });
        el("events").textContent = eventLines.slice(-200).join("\n");
        await refresh();
      }
    } catch {
      // The poller below still refreshes snapshots at 1s.
    }
  };

  const act = async (kind: InterventionKind) => {
    const select = el<HTMLSelectElement>("target");
    const textarea = el<HTMLTextAreaElement>("subgoals");
    const outcome = await submitIntervention(
      api,
      {
        kind,
        node_id: select.value,
        descriptions: textarea.value.split("\n").map((s) => s.trim()).filter(Boolean),
      },
      runState,
    );
    el("ack").textContent = outcome.submitted
      ? `${outcome.ack?.accepted ? "accepted" : "rejected"}: ${outcome.ack?.reason}`
      : `blocked: ${outcome.blockedReason}`;
    if (outcome.ack?.accepted) await refresh();
  };

  el("pause").onclick = () => act("pause");
  el("resume").onclick = () => act("resume");
  el("inject").onclick = () => act("inject_children");
  el("prune").onclick = () => act("prune");

  void refresh();
  setInterval(() => void pullEvents(), EVENT_INTERVAL_MS);
  setInterval(() => void refresh().catch(() => undefined), POLL_INTERVAL_MS);
}

function summarize(event: TrajectoryEvent): string {
  const interesting = ["node", "state", "status", "action", "ok", "outcome", "kind"];
  return interesting
    .filter((key) => key in event)
    .map((key) => `${key}=${String(event[key])}`)
    .join(" ");
}

declare global {
  interface Window {
    startConsole: typeof startConsole;
  }
}

if (typeof window !== "undefined") {
  window.startConsole = startConsole;
}
