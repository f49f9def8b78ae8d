// One polling loop per selected run: long-poll /pending, refresh status and
// curve between polls, back off exponentially while the service is down.

import { ApiClient, ServiceError } from "./api.js";
import type { ConsoleEvent } from "./model.js";

const BACKOFF_START_MS = 500;
const BACKOFF_CAP_MS = 8000;

export type Dispatch = (event: ConsoleEvent) => void;
export type Sleep = (ms: number) => Promise<void>;

const defaultSleep: Sleep = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

export class Poller {
  private active = false;
  private generation = 0;

  constructor(
    private readonly client: ApiClient,
    private readonly dispatch: Dispatch,
    private readonly now: () => number = () => Date.now(),
    private readonly sleep: Sleep = defaultSleep,
  ) {}

  stop(): void {
    this.active = false;
    this.generation += 1;
  }

  async run(runId: string): Promise<void> {
    this.generation += 1;
    const generation = this.generation;
    this.active = true;
    let backoff = BACKOFF_START_MS;
    while (this.active && generation === this.generation) {
      try {
        const status = await this.client.getStatus(runId);
        if (generation !== this.generation) return;
        this.dispatch({ type: "status", status: status.status });
        const curve = await this.client.getCurve(runId);
        if (generation !== this.generation) return;
        this.dispatch({ type: "curve", points: curve });
        // check for completion before long-polling: a finished run will
        // never produce another event and must not keep the loop alive
        if (status.status === "done" || status.status === "failed") {
          this.dispatch({ type: "pending", event: null, now: this.now() });
          this.dispatch({ type: "connection-restored" });
          this.active = false;
          return;
        }
        const pending = await this.client.getPending(runId);
        if (generation !== this.generation) return;
        this.dispatch({ type: "pending", event: pending, now: this.now() });
        this.dispatch({ type: "connection-restored" });
        backoff = BACKOFF_START_MS;
      } catch (err) {
        if (err instanceof ServiceError && err.status === 409) {
          // not a live-feedback run: keep status/curve updates flowing
          this.dispatch({ type: "pending", event: null, now: this.now() });
          await this.sleep(1000);
          continue;
        }
        this.dispatch({
          type: "connection-lost",
          message: err instanceof Error ? err.message : String(err),
        });
        await this.sleep(backoff);
        backoff = Math.min(backoff * 2, BACKOFF_CAP_MS);
      }
    }
  }
}
