// UI state as a pure reduction over the server's ordered frame stream.
// The screen is a function of this state alone, so replaying the same frames
// from scratch reproduces the identical screen.

import type { ServerFrame } from "./protocol.js";

export type Connection = "connecting" | "open" | "closed";

export interface UiState {
  connection: Connection;
  session: string | null;
  resumed: boolean;
  mode: string | null;
  targetDisplay: string | null;
  grid: string[][];
  nSequences: number;
  speed: number;
  composed: string;
  composedDisplay: string;
  finished: boolean;
  lastKey: string | null;
  lastCorrect: boolean | null;
  slots: string[];
  /** Key the operator attends next (server-confirmed); green cue. */
  attended: string | null;
  /** True from the start_trial acknowledgment until trial_result. */
  flashing: boolean;
  /** Currently lit code, or null between flashes. */
  activeFlash: { code: number; sequence: number } | null;
  paused: boolean;
  trialCount: number;
  lastError: { code: string; message: string } | null;
}

export const N_SLOTS = 10;

export function initialState(): UiState {
  return {
    connection: "connecting",
    session: null,
    resumed: false,
    mode: null,
    targetDisplay: null,
    grid: [],
    nSequences: 0,
    speed: 1,
    composed: "",
    composedDisplay: "",
    finished: false,
    lastKey: null,
    lastCorrect: null,
    slots: Array(N_SLOTS).fill(""),
    attended: null,
    flashing: false,
    activeFlash: null,
    paused: false,
    trialCount: 0,
    lastError: null,
  };
}

/** Apply one server frame; returns a new state, never mutates the input. */
export function applyFrame(state: UiState, frame: ServerFrame): UiState {
  const next: UiState = { ...state };
  switch (frame.kind) {
    case "hello":
      next.connection = "open";
      next.session = frame.session ?? null;
      next.resumed = frame.resumed ?? false;
      break;
    case "config":
      next.mode = frame.mode;
      next.targetDisplay = frame.target;
      next.grid = frame.grid.map((row) => [...row]);
      next.nSequences = frame.n_sequences;
      next.speed = frame.speed;
      break;
    case "flash":
      next.flashing = true;
      next.activeFlash =
        frame.state === "on" ? { code: frame.code, sequence: frame.sequence } : null;
      break;
    case "trial_result":
      next.flashing = false;
      next.activeFlash = null;
      next.attended = null;
      next.lastKey = frame.recognized;
      next.lastCorrect = frame.correct;
      next.trialCount = state.trialCount + 1;
      break;
    case "compose_state":
      next.composed = frame.composed;
      next.composedDisplay = frame.display;
      next.finished = frame.finished;
      if (frame.last_key !== null) next.lastKey = frame.last_key;
      break;
    case "suggestions":
      next.slots = [...frame.slots];
      break;
    case "attend":
      if (frame.accepted) next.attended = frame.key;
      break;
    case "function_key":
      if (frame.accepted) {
        if (frame.name === "start_trial") next.flashing = true;
        if (frame.name === "pause") next.paused = true;
        if (frame.name === "resume") next.paused = false;
        if (frame.name === "set_speed" && typeof frame.value === "number") {
          next.speed = frame.value;
        }
      }
      break;
    case "error":
      next.lastError = { code: frame.code, message: frame.message };
      break;
    case "bye":
      next.connection = "closed";
      break;
  }
  return next;
}

/** Transport closed without a bye: same banner, input disabled. */
export function markDisconnected(state: UiState): UiState {
  return { ...state, connection: "closed", flashing: false, activeFlash: null };
}
