// Wire protocol of the event gateway. Every message is one JSON object,
// shaped {type, payload}, one per line (NDJSON) or per WebSocket text frame.

export type EyeState = "open" | "closed";

export interface ConfigPayload {
  fps: number;
  latency_budget_ms: number;
  min_closed_ms: number;
  word_gap_ms: number;
  session_toggle_ms: number;
}

export interface StatePayload {
  frame_index: number;
  t_ms: number;
  state: EyeState;
  confidence: number;
  latency_ms: number;
}

export type EventPayload =
  | { kind: "session_started"; t_ms: number }
  | {
      kind: "word";
      t_ms: number;
      blink_count: number;
      pattern: string;
      token: string;
    }
  | { kind: "unknown_pattern"; t_ms: number; blink_count: number }
  | { kind: "session_ended"; t_ms: number; discarded_blinks: number };

export interface ErrorPayload {
  message: string;
}

export type WireMessage =
  | { type: "config"; payload: ConfigPayload }
  | { type: "state"; payload: StatePayload }
  | { type: "event"; payload: EventPayload }
  | { type: "error"; payload: ErrorPayload };

export function encodeLine(type: string, payload: unknown): string {
  return JSON.stringify({ type, payload }) + "\n";
}

function isRecord(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

function isEyeState(v: unknown): v is EyeState {
  return v === "open" || v === "closed";
}

function isEventPayload(p: Record<string, unknown>): boolean {
  if (typeof p.t_ms !== "number") return false;
  switch (p.kind) {
    case "session_started":
      return true;
    case "word":
      return (
        typeof p.blink_count === "number" &&
        typeof p.pattern === "string" &&
        typeof p.token === "string"
      );
    case "unknown_pattern":
      return typeof p.blink_count === "number";
    case "session_ended":
      return typeof p.discarded_blinks === "number";
    default:
      return false;
  }
}

// Returns null for anything that is not a well-formed gateway message;
// callers treat that as a protocol error, never as a crash.
export function parseLine(line: string): WireMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch {
    return null;
  }
  if (!isRecord(doc) || !isRecord(doc.payload)) return null;
  const p = doc.payload;
  switch (doc.type) {
    case "config":
      if (
        typeof p.fps === "number" &&
        typeof p.latency_budget_ms === "number" &&
        typeof p.min_closed_ms === "number" &&
        typeof p.word_gap_ms === "number" &&
        typeof p.session_toggle_ms === "number"
      ) {
        return { type: "config", payload: p as unknown as ConfigPayload };
      }
      return null;
    case "state":
      if (
        typeof p.frame_index === "number" &&
        typeof p.t_ms === "number" &&
        isEyeState(p.state) &&
        typeof p.confidence === "number" &&
        typeof p.latency_ms === "number"
      ) {
        return { type: "state", payload: p as unknown as StatePayload };
      }
      return null;
    case "event":
      if (isEventPayload(p)) {
        return { type: "event", payload: p as unknown as EventPayload };
      }
      return null;
    case "error":
      if (typeof p.message === "string") {
        return { type: "error", payload: { message: p.message } };
      }
      return null;
    default:
      return null;
  }
}
