// End-to-end round trip against the real Python service: start it, launch a
// live feedback run, drive the console's own client and view-model through
// poll -> render -> submit, and verify the ack lands in history.
//
// Requires the Python package to be installed (`pip install -e .`); enabled
// with RUN_E2E=1 (`npm run e2e`).

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ApiClient } from "../src/api.js";
import { initialState, update, type ConsoleState } from "../src/model.js";

const RUN_E2E = process.env.RUN_E2E === "1";
const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess | null = null;
let workDir = "";

function pythonOk(): boolean {
  const probe = spawnSync("python3", ["-c", "import presmaint"], { timeout: 30000 });
  return probe.status === 0;
}

async function waitForService(client: ApiClient, timeoutMs = 30000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      await client.listRuns();
      return;
    } catch {
      await new Promise((r) => setTimeout(r, 200));
    }
  }
  throw new Error("service did not come up");
}

describe.runIf(RUN_E2E && pythonOk())("feedback round trip", () => {
  beforeAll(async () => {
    workDir = mkdtempSync(join(tmpdir(), "console-e2e-"));
    const write = spawnSync(
      "python3",
      [
        "-c",
        [
          "import sys",
          "from presmaint import artifacts, mdp",
          "artifacts.save_mdp(mdp.toy_two_state_spec(), sys.argv[1])",
        ].join("\n"),
        join(workDir, "mdp.spec.json"),
      ],
      { timeout: 60000 },
    );
    expect(write.status).toBe(0);
    service = spawn(
      "python3",
      ["-m", "presmaint.cli", "serve", "--port", String(PORT), "--run-dir", join(workDir, "runs")],
      { stdio: "ignore" },
    );
    await waitForService(new ApiClient(BASE));
  }, 60000);

  afterAll(() => {
    service?.kill();
  });

  it("polls a pending event, submits a label, and records history", async () => {
    const client = new ApiClient(BASE);
    const createResp = await fetch(`${BASE}/runs`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        config: {
          kind: "rlhf",
          dir: workDir,
          agent: "dqn",
          steps: 20,
          seed: 7,
          mode: "live",
          delta: 0.5,
          feedback_rate: 1.0,
          live_timeout: 2.0,
        },
      }),
    });
    expect(createResp.status).toBe(201);
    const { run_id } = (await createResp.json()) as { run_id: string };

    let state: ConsoleState = update(initialState(), { type: "select", runId: run_id });

    // console loop: long-poll until an event renders
    let pending = null;
    for (let i = 0; i < 60 && pending === null; i++) {
      pending = await client.getPending(run_id);
    }
    expect(pending).not.toBeNull();
    state = update(state, { type: "pending", event: pending!, now: Date.now() });
    expect(state.pending?.event_id).toBe(pending!.event_id);
    expect(state.pending?.action_name).toBeTruthy();

    // submit exactly what is rendered; server ack precedes the history append
    await client.submitFeedback(run_id, state.pending!.event_id, "positive");
    state = update(state, {
      type: "submitted",
      eventId: state.pending!.event_id,
      label: "positive",
      now: Date.now(),
    });
    expect(state.history).toHaveLength(1);
    expect(state.history[0].label).toBe("positive");

    // double submission surfaces first-write-wins as a conflict
    await expect(
      client.submitFeedback(run_id, state.history[0].eventId, "negative"),
    ).rejects.toMatchObject({ status: expect.any(Number) });

    // the run eventually completes and serves a curve
    const deadline = Date.now() + 120000;
    let status = await client.getStatus(run_id);
    while (status.status !== "done" && status.status !== "failed" && Date.now() < deadline) {
      await new Promise((r) => setTimeout(r, 500));
      status = await client.getStatus(run_id);
    }
    expect(status.status).toBe("done");
    const curve = await client.getCurve(run_id);
    state = update(state, { type: "curve", points: curve });
    expect(state.curve.length).toBeGreaterThanOrEqual(0);
  }, 180000);
});
