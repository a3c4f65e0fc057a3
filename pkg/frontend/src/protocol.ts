// speller-wire.v1: typed frames, client-frame builders, and a strict parser
// for the server's ordered frame stream.  No silent fallbacks — anything that
// is not a well-formed known frame throws, so a protocol break is visible.

export const PROTOCOL = "speller-wire.v1";

export const FUNCTION_NAMES = ["start_trial", "pause", "resume", "set_speed"] as const;
export type FunctionName = (typeof FUNCTION_NAMES)[number];

export const ERROR_CODES = ["busy", "bad_frame", "mid_trial", "protocol", "internal"] as const;
export type ErrorCode = (typeof ERROR_CODES)[number];

export interface HelloFrame {
  kind: "hello";
  role?: "server";
  protocol: string;
  session?: string;
  resumed?: boolean;
}

export interface ConfigFrame {
  kind: "config";
  mode: string;
  target: string | null;
  grid: string[][];
  timing: {
    flash_ms: number;
    isi_ms: number;
    inter_sequence_ms: number;
    post_selection_ms: number;
  };
  n_sequences: number;
  speed: number;
}

export interface FlashFrame {
  kind: "flash";
  code: number;
  state: "on" | "off";
  sequence: number;
}

export interface TrialResultFrame {
  kind: "trial_result";
  recognized: string;
  intended: string;
  correct: boolean;
}

export interface ComposeStateFrame {
  kind: "compose_state";
  composed: string;
  display: string;
  finished: boolean;
  last_key: string | null;
}

export interface SuggestionsFrame {
  kind: "suggestions";
  slots: string[];
}

export interface AttendFrame {
  kind: "attend";
  key: string;
  accepted?: boolean;
}

export interface FunctionKeyFrame {
  kind: "function_key";
  name: FunctionName;
  value?: number;
  accepted?: boolean;
}

export interface ErrorFrame {
  kind: "error";
  code: ErrorCode;
  message: string;
}

export interface ByeFrame {
  kind: "bye";
  reason?: string;
}

export type ServerFrame =
  | HelloFrame
  | ConfigFrame
  | FlashFrame
  | TrialResultFrame
  | ComposeStateFrame
  | SuggestionsFrame
  | AttendFrame
  | FunctionKeyFrame
  | ErrorFrame
  | ByeFrame;

export type ClientFrame = HelloFrame | AttendFrame | FunctionKeyFrame | ByeFrame;

const SERVER_KINDS = new Set([
  "hello",
  "config",
  "flash",
  "trial_result",
  "compose_state",
  "suggestions",
  "attend",
  "function_key",
  "error",
  "bye",
]);

export class ProtocolViolation extends Error {}

function fail(message: string): never {
  throw new ProtocolViolation(message);
}

/** Parse one raw WebSocket text message into a known server frame. */
export function parseServerFrame(raw: string): ServerFrame {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    fail("frame is not valid JSON");
  }
  if (doc === null || typeof doc !== "object" || Array.isArray(doc)) {
    fail("frame must be a JSON object");
  }
  const frame = doc as Record<string, unknown>;
  const kind = frame.kind;
  if (typeof kind !== "string" || !SERVER_KINDS.has(kind)) {
    fail(`unknown frame kind: ${String(kind)}`);
  }
  switch (kind) {
    case "hello":
      if (frame.protocol !== PROTOCOL) {
        fail(`protocol mismatch: ${String(frame.protocol)}`);
      }
      break;
    case "config":
      if (!Array.isArray(frame.grid) || typeof frame.timing !== "object") {
        fail("config frame missing grid/timing");
      }
      break;
    case "flash":
      if (
        typeof frame.code !== "number" ||
        (frame.state !== "on" && frame.state !== "off")
      ) {
        fail("flash frame needs numeric code and on/off state");
      }
      break;
    case "compose_state":
      if (typeof frame.composed !== "string" || typeof frame.display !== "string") {
        fail("compose_state frame needs composed and display text");
      }
      break;
    case "suggestions":
      if (
        !Array.isArray(frame.slots) ||
        frame.slots.some((s) => typeof s !== "string")
      ) {
        fail("suggestions frame needs a string slot list");
      }
      break;
    case "trial_result":
      if (typeof frame.recognized !== "string") {
        fail("trial_result frame needs a recognized key");
      }
      break;
    case "error":
      if (typeof frame.code !== "string") {
        fail("error frame needs a code");
      }
      break;
  }
  return frame as unknown as ServerFrame;
}

export function helloFrame(session?: string): HelloFrame {
  const frame: HelloFrame = { kind: "hello", protocol: PROTOCOL };
  if (session !== undefined) frame.session = session;
  return frame;
}

export function attendFrame(key: string): AttendFrame {
  return { kind: "attend", key };
}

export function functionFrame(name: FunctionName, value?: number): FunctionKeyFrame {
  const frame: FunctionKeyFrame = { kind: "function_key", name };
  if (value !== undefined) frame.value = value;
  return frame;
}

export function byeFrame(): ByeFrame {
  return { kind: "bye" };
}

export function encodeFrame(frame: ClientFrame): string {
  return JSON.stringify(frame);
}
