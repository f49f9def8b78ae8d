// DOM wiring for the feedback console. State changes flow exclusively
// through the view-model reducer; the server ack always precedes a history
// append (no optimistic UI).

import { ApiClient, ServiceError, type FeedbackLabel } from "./api.js";
import { curvePath } from "./curve.js";
import {
  actionName,
  initialState,
  keyToAction,
  update,
  type ConsoleEvent,
  type ConsoleState,
} from "./model.js";
import { Poller } from "./poller.js";

const baseUrl =
  new URLSearchParams(window.location.search).get("service") ?? "http://127.0.0.1:8080";
const client = new ApiClient(baseUrl);

let state: ConsoleState = initialState();
let submitting = false;

const dispatch = (event: ConsoleEvent): void => {
  state = update(state, event);
  render();
};

const poller = new Poller(client, dispatch);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function refreshRuns(): Promise<void> {
  try {
    dispatch({ type: "runs", runs: await client.listRuns() });
    dispatch({ type: "connection-restored" });
  } catch (err) {
    dispatch({
      type: "connection-lost",
      message: err instanceof Error ? err.message : String(err),
    });
  }
}

function selectRun(runId: string): void {
  poller.stop();
  dispatch({ type: "select", runId });
  void poller.run(runId);
}

async function submit(label: FeedbackLabel): Promise<void> {
  if (!state.pending || !state.selectedRun || submitting) return;
  const eventId = state.pending.event_id;
  submitting = true;
  try {
    await client.submitFeedback(state.selectedRun, eventId, label);
    dispatch({ type: "submitted", eventId, label, now: Date.now() });
  } catch (err) {
    if (err instanceof ServiceError && (err.status === 409 || err.status === 404)) {
      dispatch({ type: "conflict", eventId });
    } else {
      dispatch({
        type: "connection-lost",
        message: err instanceof Error ? err.message : String(err),
      });
    }
  } finally {
    submitting = false;
  }
}

function skip(): void {
  // no submission: the server's timeout resolves the event as unanswered
  if (state.pending) {
    dispatch({ type: "pending", event: null, now: Date.now() });
  }
}

function render(): void {
  el("banner").style.display = state.connection === "reconnecting" ? "block" : "none";
  el("notice").textContent = state.notice ?? "";

  const runList = el("runs");
  runList.innerHTML = "";
  for (const run of state.runs) {
    const item = document.createElement("li");
    const button = document.createElement("button");
    button.textContent = `${run.run_id} (${run.kind}, ${run.status})`;
    button.onclick = () => selectRun(run.run_id);
    if (run.run_id === state.selectedRun) button.classList.add("selected");
    item.appendChild(button);
    runList.appendChild(item);
  }

  el("run-status").textContent = state.selectedRun
    ? `${state.selectedRun}: ${state.runStatus ?? "..."}`
    : "select a run";

  const card = el("pending-card");
  if (state.pending) {
    card.style.display = "block";
    el("pending-action").textContent = actionName(state.pending.action);
    el("pending-context").textContent =
      `episode ${state.pending.episode}, step ${state.pending.step} - ` +
      `health state ${state.pending.state}` +
      (state.pending.state_rul_center !== null
        ? ` (typical RUL ${state.pending.state_rul_center.toFixed(1)} cycles)`
        : "");
  } else {
    card.style.display = "none";
  }
  el("idle").style.display =
    state.pending || !state.selectedRun ? "none" : "block";

  const history = el<HTMLTableSectionElement>("history-body");
  history.innerHTML = "";
  for (const entry of state.history) {
    const row = document.createElement("tr");
    row.innerHTML =
      `<td>${entry.eventId}</td><td>${entry.episode}</td><td>${entry.step}</td>` +
      `<td>${entry.state}</td><td>${entry.actionLabel}</td>` +
      `<td>${entry.label}</td><td>${entry.latencyMs.toFixed(0)} ms</td>`;
    history.appendChild(row);
  }

  const svg = el("curve-svg");
  const geometry = curvePath(state.curve, 460, 120);
  if (geometry) {
    el("curve-path").setAttribute("d", geometry.path);
    el("curve-label").textContent =
      `episode rewards (${state.curve.length} episodes, ` +
      `min ${geometry.yMin.toFixed(1)}, max ${geometry.yMax.toFixed(1)})`;
    svg.style.display = "block";
    el("curve-empty").style.display = "none";
  } else {
    svg.style.display = "none";
    el("curve-empty").style.display = "block";
  }
}

export function start(): void {
  el("positive").onclick = () => void submit("positive");
  el("negative").onclick = () => void submit("negative");
  el("skip").onclick = () => skip();
  document.addEventListener("keydown", (event) => {
    const action = keyToAction(event.key);
    if (action === "skip") skip();
    else if (action) void submit(action);
  });
  void refreshRuns();
  window.setInterval(() => void refreshRuns(), 5000);
  render();
}

start();
