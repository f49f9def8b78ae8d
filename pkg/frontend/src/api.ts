// Typed client for the maintenance service HTTP API. All console traffic
// goes through this module; no other backend access exists.

export interface RunDescriptor {
  run_id: string;
  kind: string;
  status: string;
  created_at: number;
  config: Record<string, unknown>;
}

export interface StatusDoc {
  run_id: string;
  kind: string;
  status: string;
  episodes: number;
  last_total_reward: number | null;
  epsilon_or_entropy: number | null;
  error: string | null;
}

export interface PendingEvent {
  event_id: string;
  run_id: string;
  episode: number;
  step: number;
  state: number;
  action: number;
  action_name: string;
  state_rul_center: number | null;
}

export interface CurvePoint {
  episode: number;
  total_reward: number;
}

export type FeedbackLabel = "positive" | "negative";

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function readError(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { detail?: unknown };
    if (body && body.detail !== undefined) return JSON.stringify(body.detail);
  } catch {
    // non-JSON error body
  }
  return resp.statusText || `HTTP ${resp.status}`;
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!resp.ok) {
      throw new ServiceError(resp.status, await readError(resp));
    }
    return resp;
  }

  async listRuns(): Promise<RunDescriptor[]> {
    const resp = await this.request("/runs");
    return (await resp.json()) as RunDescriptor[];
  }

  async getStatus(runId: string): Promise<StatusDoc> {
    const resp = await this.request(`/runs/${runId}/status`);
    return (await resp.json()) as StatusDoc;
  }

  /** Long-polls the service; resolves to null when nothing is pending. */
  async getPending(runId: string): Promise<PendingEvent | null> {
    const resp = await this.request(`/runs/${runId}/pending`);
    const body = (await resp.json()) as { event: PendingEvent | null };
    return body.event;
  }

  async submitFeedback(
    runId: string,
    eventId: string,
    label: FeedbackLabel,
  ): Promise<void> {
    await this.request(`/runs/${runId}/feedback`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ event_id: eventId, label }),
    });
  }

  async getCurve(runId: string): Promise<CurvePoint[]> {
    const resp = await this.request(`/runs/${runId}/curve?format=json`);
    return (await resp.json()) as CurvePoint[];
  }
}
