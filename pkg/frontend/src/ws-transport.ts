// Browser WebSocket framing: one wire message per text frame.

import type { Transport, TransportFactory, TransportHooks } from "./client.js";

export function wsTransport(url: string): TransportFactory {
  return (hooks: TransportHooks): Transport => {
    const ws = new WebSocket(url);
    ws.onopen = () => hooks.onOpen();
    ws.onmessage = (ev) => {
      if (typeof ev.data === "string") hooks.onLine(ev.data);
    };
    ws.onclose = () => hooks.onClose();
    ws.onerror = () => {
      // onclose follows and owns the reconnect
    };
    return {
      send(line: string): void {
        if (ws.readyState === WebSocket.OPEN) ws.send(line.trimEnd());
      },
      close(): void {
        ws.close();
      },
    };
  };
}
