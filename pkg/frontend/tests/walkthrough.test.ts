// End-to-end session walkthrough against a real simulated-mode gateway.
// A scripted client holds and releases the blink key; the gateway does all
// decoding. The dashboard state must reproduce the gateway's event log
// exactly: [session started, "Hi", "No", session ended].
//
// The gateway stamps simulated frames by message count, not wall clock, so
// the script paces itself on sent-message counts and received events. That
// keeps it deterministic even when timers jitter under load.

import { spawn, type ChildProcessByStdio } from "node:child_process";
import type { Readable } from "node:stream";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { GatewayClient } from "../src/client.js";
import { tcpTransport } from "../src/node-transport.js";
import { KeySimulator } from "../src/simulator.js";
import type { ConfigPayload, EventPayload } from "../src/protocol.js";
import {
  applyKey,
  applyMessage,
  applyStatus,
  initialViewModel,
  type ViewModel,
} from "../src/viewmodel.js";

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

async function waitFor(
  pred: () => boolean,
  timeoutMs: number,
  label: string,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!pred()) {
    if (Date.now() > deadline) {
      throw new Error(`timed out waiting for ${label}`);
    }
    await sleep(5);
  }
}

type ServerProc = ChildProcessByStdio<null, Readable, Readable>;

function waitForPort(proc: ServerProc): Promise<number> {
  return new Promise((resolve, reject) => {
    let buf = "";
    const timer = setTimeout(
      () => reject(new Error("timed out waiting for the server port")),
      20000,
    );
    proc.stdout.on("data", (chunk: Buffer) => {
      buf += chunk.toString("utf8");
      const m = buf.match(/listening on port (\d+)/);
      if (m?.[1]) {
        clearTimeout(timer);
        resolve(Number(m[1]));
      }
    });
    proc.once("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`server exited before listening (code ${code})`));
    });
  });
}

describe("session walkthrough against a live gateway", () => {
  let server: ServerProc;
  let port: number;

  beforeAll(async () => {
    server = spawn(
      "python3",
      ["-u", "-m", "blinkcomm", "serve", "--simulated", "--bind", "127.0.0.1:0"],
      { stdio: ["ignore", "pipe", "pipe"] },
    );
    server.stderr.on("data", (chunk: Buffer) => {
      process.stderr.write(`[gateway] ${chunk.toString("utf8")}`);
    });
    port = await waitForPort(server);
  }, 30000);

  afterAll(() => {
    server.kill("SIGTERM");
  });

  it(
    'scripted hold/release produces [session started, "Hi", "No", session ended]',
    async () => {
      let vm: ViewModel = initialViewModel();
      let cfg: ConfigPayload | null = null;
      const eventLog: EventPayload[] = [];
      const garbage: string[] = [];

      const client = new GatewayClient(tcpTransport("127.0.0.1", port), {
        onStatus: (s) => {
          vm = applyStatus(vm, s);
        },
        onMessage: (m) => {
          vm = applyMessage(vm, m);
          if (m.type === "config") cfg = m.payload;
          if (m.type === "event") eventLog.push(m.payload);
        },
        onGarbage: (line) => {
          garbage.push(line);
        },
      });
      client.start();
      await waitFor(() => cfg !== null, 10000, "the config message");
      const c = cfg as unknown as ConfigPayload;

      const sim = new KeySimulator((type, payload) => client.send(type, payload), c.fps);

      // Frame targets derived from the served config, padded so a late poll
      // can only overshoot into still-valid territory.
      const perFrame = 1000 / c.fps;
      const toggleHold = Math.ceil(c.session_toggle_ms / perFrame) + 8;
      const blinkHold = Math.ceil(c.min_closed_ms / perFrame) + 1;
      const blinkGap = Math.ceil(c.min_closed_ms / perFrame) + 2;
      const wordWait = Math.ceil(c.word_gap_ms / perFrame) + 4;
      // The inter-blink gap must stay clear of the word boundary even if a
      // slow poll lets a few extra frames through.
      expect(blinkGap + 3).toBeLessThan(Math.ceil(c.word_gap_ms / perFrame));

      async function holdFor(closedFrames: number): Promise<void> {
        const target = sim.sent.closed + closedFrames;
        vm = applyKey(vm, true);
        sim.setHeld(true);
        await waitFor(() => sim.sent.closed >= target, 30000, "held frames");
        sim.setHeld(false);
        vm = applyKey(vm, false);
      }

      async function releaseFor(openFrames: number): Promise<void> {
        const target = sim.sent.open + openFrames;
        await waitFor(() => sim.sent.open >= target, 30000, "released frames");
      }

      sim.start();
      try {
        await holdFor(toggleHold);
        await waitFor(() => eventLog.length >= 1, 10000, "session start");

        for (const blinks of [3, 2]) {
          for (let i = 0; i < blinks; i++) {
            await releaseFor(blinkGap);
            await holdFor(blinkHold);
          }
          await releaseFor(wordWait);
        }
        await waitFor(() => eventLog.length >= 3, 10000, "both words");

        await holdFor(toggleHold);
        await waitFor(() => eventLog.length >= 4, 10000, "session end");
      } finally {
        sim.stop();
        client.stop();
      }

      // The gateway's event log, exactly as received.
      expect(garbage).toEqual([]);
      expect(eventLog.map((e) => e.kind)).toEqual([
        "session_started",
        "word",
        "word",
        "session_ended",
      ]);
      const hi = eventLog[1] as Extract<EventPayload, { kind: "word" }>;
      const no = eventLog[2] as Extract<EventPayload, { kind: "word" }>;
      expect(hi.token).toBe("Hi");
      expect(hi.blink_count).toBe(3);
      expect(hi.pattern).toBe("10101");
      expect(no.token).toBe("No");
      expect(no.blink_count).toBe(2);
      expect(no.pattern).toBe("101");
      const ended = eventLog[3] as Extract<EventPayload, { kind: "session_ended" }>;
      expect(ended.discarded_blinks).toBe(0);
      const stamps = eventLog.map((e) => e.t_ms);
      expect([...stamps].sort((a, b) => a - b)).toEqual(stamps);

      // The transcript equals that log, entry for entry.
      expect(vm.transcript.map((e) => ({ kind: e.kind, t_ms: e.t_ms }))).toEqual(
        eventLog.map((e) => ({ kind: e.kind, t_ms: e.t_ms })),
      );
      expect(vm.transcript.map((e) => e.text)).toEqual([
        "session started",
        "Hi",
        "No",
        "session ended (0 discarded)",
      ]);
      expect(vm.words).toEqual(["Hi", "No"]);
      expect(vm.inSession).toBe(false);
      expect(vm.keyHeld).toBe(false);
      expect(vm.status).toBe("disconnected");
    },
    120000,
  );
});
