// Pure view state derived from gateway messages plus local key state.
// All decoding stays server-side: words and sessions appear here only when
// the gateway says so. The run counters below exist for progress bars and
// the pending-blink hint, nothing else.

import type {
  ConfigPayload,
  EventPayload,
  EyeState,
  WireMessage,
} from "./protocol.js";

export type ConnectionStatus =
  | "disconnected"
  | "connecting"
  | "connected"
  | "reconnecting";

export interface TranscriptEntry {
  kind: EventPayload["kind"];
  t_ms: number;
  text: string;
}

export const STRIP_LENGTH = 50;
export const LATENCY_HISTORY = 120;

export interface ViewModel {
  status: ConnectionStatus;
  config: ConfigPayload | null;
  eye: EyeState | null;
  confidence: number;
  keyHeld: boolean;
  strip: EyeState[]; // most recent last, capped at STRIP_LENGTH
  closedRun: number; // consecutive closed frames seen
  openRun: number; // consecutive open frames seen
  pendingBlinks: number;
  blinkProgress: number; // toward min_closed, 0..1
  wordGapProgress: number; // toward word_gap, 0..1, only inside a session
  toggleProgress: number; // toward session_toggle, 0..1
  inSession: boolean;
  transcript: TranscriptEntry[];
  words: string[]; // exactly the emitted tokens, in order
  latencies: number[]; // classify latency per frame, capped
  lastError: string | null;
}

export function initialViewModel(): ViewModel {
  return {
    status: "disconnected",
    config: null,
    eye: null,
    confidence: 0,
    keyHeld: false,
    strip: [],
    closedRun: 0,
    openRun: 0,
    pendingBlinks: 0,
    blinkProgress: 0,
    wordGapProgress: 0,
    toggleProgress: 0,
    inSession: false,
    transcript: [],
    words: [],
    latencies: [],
    lastError: null,
  };
}

export function applyStatus(vm: ViewModel, status: ConnectionStatus): ViewModel {
  // A drop resets per-connection display state but keeps the transcript.
  if (status !== "connected") {
    return {
      ...vm,
      status,
      eye: null,
      strip: [],
      closedRun: 0,
      openRun: 0,
      blinkProgress: 0,
      wordGapProgress: 0,
      toggleProgress: 0,
    };
  }
  return { ...vm, status, lastError: null };
}

export function applyKey(vm: ViewModel, held: boolean): ViewModel {
  return { ...vm, keyHeld: held };
}

function transcriptText(ev: EventPayload): string {
  switch (ev.kind) {
    case "session_started":
      return "session started";
    case "word":
      return ev.token;
    case "unknown_pattern":
      return `unknown pattern (${ev.blink_count} blinks)`;
    case "session_ended":
      return `session ended (${ev.discarded_blinks} discarded)`;
  }
}

function applyEvent(vm: ViewModel, ev: EventPayload): ViewModel {
  const entry: TranscriptEntry = {
    kind: ev.kind,
    t_ms: ev.t_ms,
    text: transcriptText(ev),
  };
  const next: ViewModel = {
    ...vm,
    transcript: [...vm.transcript, entry],
    pendingBlinks: 0, // the gateway resolved the pending group
  };
  // Session boundaries restart the word-gap accounting. On the wire a
  // toggle always arrives mid-closed-run, so this is belt and braces.
  switch (ev.kind) {
    case "session_started":
      return { ...next, inSession: true, openRun: 0, wordGapProgress: 0 };
    case "session_ended":
      return { ...next, inSession: false, openRun: 0, wordGapProgress: 0 };
    case "word":
      return { ...next, words: [...vm.words, ev.token] };
    case "unknown_pattern":
      return next;
  }
}

export function applyMessage(vm: ViewModel, msg: WireMessage): ViewModel {
  switch (msg.type) {
    case "config":
      return { ...vm, config: msg.payload };
    case "error":
      return { ...vm, lastError: msg.payload.message };
    case "event":
      return applyEvent(vm, msg.payload);
    case "state": {
      const p = msg.payload;
      const frameMs = vm.config ? 1000 / vm.config.fps : 0;
      const closedRun = p.state === "closed" ? vm.closedRun + 1 : 0;
      const openRun = p.state === "open" ? vm.openRun + 1 : 0;
      const strip = [...vm.strip, p.state].slice(-STRIP_LENGTH);
      const latencies = [...vm.latencies, p.latency_ms].slice(-LATENCY_HISTORY);

      let pendingBlinks = vm.pendingBlinks;
      let blinkProgress = 0;
      let wordGapProgress = 0;
      let toggleProgress = 0;
      if (vm.config) {
        const c = vm.config;
        blinkProgress = Math.min(1, (closedRun * frameMs) / c.min_closed_ms);
        toggleProgress = Math.min(1, (closedRun * frameMs) / c.session_toggle_ms);
        if (vm.inSession) {
          wordGapProgress = Math.min(1, (openRun * frameMs) / c.word_gap_ms);
          // Display hint only: count the closure the moment it becomes long
          // enough to be a blink. Gateway events remain the authority and
          // reset this counter.
          const crossed =
            closedRun * frameMs >= c.min_closed_ms &&
            (closedRun - 1) * frameMs < c.min_closed_ms;
          if (crossed) pendingBlinks += 1;
        }
      }
      return {
        ...vm,
        eye: p.state,
        confidence: p.confidence,
        strip,
        latencies,
        closedRun,
        openRun,
        pendingBlinks,
        blinkProgress,
        wordGapProgress,
        toggleProgress,
      };
    }
  }
}
