// NDJSON over plain TCP, for Node scripts and tests. The gateway serves
// this framing to any client that does not open with an HTTP upgrade.

import * as net from "node:net";

import type { Transport, TransportFactory, TransportHooks } from "./client.js";

export function tcpTransport(host: string, port: number): TransportFactory {
  return (hooks: TransportHooks): Transport => {
    const socket = net.createConnection({ host, port });
    socket.setNoDelay(true);
    let buffer = "";
    let closed = false;

    socket.on("connect", () => hooks.onOpen());
    socket.on("data", (chunk) => {
      buffer += chunk.toString("utf8");
      let nl: number;
      while ((nl = buffer.indexOf("\n")) >= 0) {
        hooks.onLine(buffer.slice(0, nl));
        buffer = buffer.slice(nl + 1);
      }
    });
    const onGone = () => {
      if (!closed) {
        closed = true;
        hooks.onClose();
      }
    };
    socket.on("close", onGone);
    socket.on("error", onGone);

    return {
      send(line: string): void {
        if (!socket.destroyed) socket.write(line);
      },
      close(): void {
        closed = true;
        socket.destroy();
      },
    };
  };
}
