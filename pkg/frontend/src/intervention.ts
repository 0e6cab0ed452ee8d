// Intervention submission: pause-state guard, validation, and retry with a
// stable idempotency key so a network retry can never double-submit.

import type { RunApi } from "./api.js";
import type { InterventionAck, InterventionForm } from "./types.js";

export interface SubmitOutcome {
  submitted: boolean;
  ack: InterventionAck | null;
  blockedReason: string | null;
}

let counter = 0;

export function newIdempotencyKey(): string {
  counter += 1;
  return `console-${Date.now().toString(36)}-${counter}`;
}

export function validateForm(form: InterventionForm): string | null {
  if (form.kind === "inject_children") {
    if (!form.node_id) return "pick a target node";
    const texts = form.descriptions.map((d) => d.trim()).filter(Boolean);
    if (!texts.length) return "enter at least one subgoal";
  }
  if (form.kind === "prune" && !form.node_id) return "pick a target node";
  return null;
}

/**
 * Submit one intervention. Structural directives (inject/prune) are only sent
 * while the run is paused; the server re-checks, but the client blocks first.
 * A failed transmission is retried with the same idempotency key.
 */
export async function submitIntervention(
  api: RunApi,
  form: InterventionForm,
  runState: string,
  maxAttempts = 2,
  key: string = newIdempotencyKey(),
): Promise<SubmitOutcome> {
  const problem = validateForm(form);
  if (problem) {
    return { submitted: false, ack: null, blockedReason: problem };
  }
  const structural = form.kind === "inject_children" || form.kind === "prune";
  if (structural && runState !== "paused") {
    return {
      submitted: false,
      ack: null,
      blockedReason: "pause the run before editing the plan",
    };
  }
  let lastError: unknown = null;
  for (let attempt = 0; attempt < maxAttempts; attempt += 1) {
    try {
      const ack = await api.intervene(form, key);
      return { submitted: true, ack, blockedReason: null };
    } catch (error) {
      lastError = error;
    }
  }
  return {
    submitted: false,
    ack: null,
    blockedReason: `could not reach the run service: ${String(lastError)}`,
  };
}
