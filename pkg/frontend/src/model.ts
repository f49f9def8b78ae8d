// Pure view-model for the console: a reducer over UI-relevant events.
// Invariants: at most one pending event is ever rendered, the feedback
// history only grows, and a label can only be submitted for the event
// currently rendered.

import type { CurvePoint, FeedbackLabel, PendingEvent, RunDescriptor } from "./api.js";

export const ACTION_NAMES = ["No Action", "Partial Maintenance", "Complete Overhaul"];

export function actionName(index: number): string {
  return ACTION_NAMES[index] ?? `Action ${index}`;
}

export type Connection = "ok" | "reconnecting";

export interface HistoryEntry {
  eventId: string;
  episode: number;
  step: number;
  state: number;
  actionLabel: string;
  label: FeedbackLabel;
  latencyMs: number;
}

export interface ConsoleState {
  runs: RunDescriptor[];
  selectedRun: string | null;
  runStatus: string | null;
  pending: PendingEvent | null;
  pendingShownAt: number | null;
  history: HistoryEntry[];
  curve: CurvePoint[];
  connection: Connection;
  notice: string | null;
}

export function initialState(): ConsoleState {
  return {
    runs: [],
    selectedRun: null,
    runStatus: null,
    pending: null,
    pendingShownAt: null,
    history: [],
    curve: [],
    connection: "ok",
    notice: null,
  };
}

export type ConsoleEvent =
  | { type: "runs"; runs: RunDescriptor[] }
  | { type: "select"; runId: string }
  | { type: "status"; status: string }
  | { type: "pending"; event: PendingEvent | null; now: number }
  | { type: "submitted"; eventId: string; label: FeedbackLabel; now: number }
  | { type: "conflict"; eventId: string }
  | { type: "curve"; points: CurvePoint[] }
  | { type: "connection-lost"; message: string }
  | { type: "connection-restored" };

export function update(state: ConsoleState, event: ConsoleEvent): ConsoleState {
  switch (event.type) {
    case "runs":
      return { ...state, runs: event.runs };
    case "select":
      if (state.selectedRun === event.runId) return state;
      return {
        ...initialState(),
        runs: state.runs,
        selectedRun: event.runId,
        connection: state.connection,
      };
    case "status":
      return { ...state, runStatus: event.status };
    case "pending": {
      if (event.event === null) {
        return { ...state, pending: null, pendingShownAt: null };
      }
      if (state.pending && state.pending.event_id === event.event.event_id) {
        return state; // same event still pending; keep the original render time
      }
      return { ...state, pending: event.event, pendingShownAt: event.now, notice: null };
    }
    case "submitted": {
      if (!state.pending || state.pending.event_id !== event.eventId) {
        return state; // never record feedback for an event that is not rendered
      }
      const entry: HistoryEntry = {
        eventId: event.eventId,
        episode: state.pending.episode,
        step: state.pending.step,
        state: state.pending.state,
        actionLabel: actionName(state.pending.action),
        label: event.label,
        latencyMs: state.pendingShownAt === null ? 0 : event.now - state.pendingShownAt,
      };
      return {
        ...state,
        pending: null,
        pendingShownAt: null,
        history: [...state.history, entry],
      };
    }
    case "conflict": {
      // someone else labeled it first: drop the card, keep history untouched
      if (state.pending && state.pending.event_id === event.eventId) {
        return {
          ...state,
          pending: null,
          pendingShownAt: null,
          notice: "event was already labeled elsewhere",
        };
      }
      return state;
    }
    case "curve":
      return { ...state, curve: event.points };
    case "connection-lost":
      return { ...state, connection: "reconnecting", notice: event.message };
    case "connection-restored":
      return state.connection === "ok"
        ? state
        : { ...state, connection: "ok", notice: null };
  }
}

/** Keyboard shortcuts: p/n label the pending event, s skips it locally
 * (the server timeout turns an unanswered event into label=none). */
export function keyToAction(key: string): FeedbackLabel | "skip" | null {
  if (key === "p") return "positive";
  if (key === "n") return "negative";
  if (key === "s") return "skip";
  return null;
}
