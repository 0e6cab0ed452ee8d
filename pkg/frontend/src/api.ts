// Thin client for the run service. The fetch implementation is injectable so
// tests can run headless.

import type {
  EventsResponse,
  InterventionAck,
  InterventionForm,
  RunResult,
  RunStatus,
  Snapshot,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number,
  ) {
    super(message);
  }
}

export class RunApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!response.ok) {
      throw new ApiError(`GET ${path} failed: ${response.status}`, response.status);
    }
    return (await response.json()) as T;
  }

  status(): Promise<RunStatus> {
    return this.getJson("/run");
  }

  snapshot(): Promise<Snapshot> {
    return this.getJson("/run/snapshot");
  }

  events(afterSeq: number): Promise<EventsResponse> {
    return this.getJson(`/run/events?after=${afterSeq}`);
  }

  result(): Promise<RunResult> {
    return this.getJson("/run/result");
  }

  async intervene(
    form: InterventionForm,
    idempotencyKey: string,
  ): Promise<InterventionAck> {
    const response = await this.fetchImpl(`${this.baseUrl}/run/interventions`, {
      method: "POST",
      headers: {
        "content-type": "application/json",
        "x-idempotency-key": idempotencyKey,
      },
      body: JSON.stringify(form),
    });
    if (!response.ok) {
      throw new ApiError(
        `POST /run/interventions failed: ${response.status}`,
        response.status,
      );
    }
    return (await response.json()) as InterventionAck;
  }
}
