// Gateway client: framing-agnostic connection with reconnect.
// The transport seam exists because the browser speaks WebSocket while
// tests and terminal tools speak NDJSON over TCP; both carry the same
// line-shaped messages.

import { encodeLine, parseLine, type WireMessage } from "./protocol.js";
import type { ConnectionStatus } from "./viewmodel.js";

export interface Transport {
  send(line: string): void;
  close(): void;
}

export interface TransportHooks {
  onOpen(): void;
  onLine(line: string): void;
  onClose(): void;
}

export type TransportFactory = (hooks: TransportHooks) => Transport;

export interface ClientHooks {
  onStatus(status: ConnectionStatus): void;
  onMessage(msg: WireMessage): void;
  // Lines that fail to parse; useful for debugging, never fatal.
  onGarbage?(line: string): void;
}

const BACKOFF_START_MS = 1000;
const BACKOFF_CAP_MS = 8000;

export class GatewayClient {
  private transport: Transport | null = null;
  private retryMs = BACKOFF_START_MS;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;

  constructor(
    private factory: TransportFactory,
    private hooks: ClientHooks,
  ) {}

  start(): void {
    this.stopped = false;
    this.hooks.onStatus("connecting");
    this.open();
  }

  stop(): void {
    this.stopped = true;
    if (this.retryTimer) {
      clearTimeout(this.retryTimer);
      this.retryTimer = null;
    }
    this.transport?.close();
    this.transport = null;
    this.hooks.onStatus("disconnected");
  }

  send(type: string, payload: unknown): void {
    this.transport?.send(encodeLine(type, payload));
  }

  private open(): void {
    this.transport = this.factory({
      onOpen: () => {
        this.retryMs = BACKOFF_START_MS;
        this.hooks.onStatus("connected");
      },
      onLine: (line) => {
        if (!line.trim()) return;
        const msg = parseLine(line);
        if (msg) this.hooks.onMessage(msg);
        else this.hooks.onGarbage?.(line);
      },
      onClose: () => {
        this.transport = null;
        if (this.stopped) return;
        this.hooks.onStatus("reconnecting");
        this.retryTimer = setTimeout(() => {
          this.retryTimer = null;
          this.open();
        }, this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, BACKOFF_CAP_MS);
      },
    });
  }
}
