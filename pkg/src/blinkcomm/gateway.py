"""Event streaming service for live observation and simulated input.

Wire protocol: newline-delimited JSON documents {"type": ..., "payload":
...} over a full-duplex connection. Outbound types are "config" (sent once
on connect), "state" (per-frame verdicts), "event" (decode events), and
"error" (reply to a malformed inbound document). In simulated mode the
client drives the decoder with inbound {"type": "sim_state", "payload":
{"state": "open"|"closed", "t_ms": ...}} messages, which become
full-confidence StateEvents.

The same port speaks two framings. A connection whose first line starts
with "GET " is treated as an HTTP WebSocket upgrade (browsers); anything
else is plain NDJSON over the raw socket. Message content is identical in
both. Clients owe the server nothing on connect, so framing is sniffed
with a short deadline: a connection still silent when it expires is served
as NDJSON (an upgrade request always arrives immediately in practice).

One broadcaster fans events out to per-client bounded queues; a client
that cannot keep up is disconnected rather than allowed to stall the rest.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import json
import struct
import threading
from typing import Callable, Optional

from .classifier import Classifier
from .core import EyeState, StateEvent, StreamConfig
from .patterns import DecodeEvent, Decoder, Dictionary, StateEcho
from .pipeline import FrameSource, run_pipeline

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
CLIENT_QUEUE_LIMIT = 512
SNIFF_TIMEOUT_S = 0.25


def encode_message(msg_type: str, payload: dict) -> bytes:
    return (json.dumps({"type": msg_type, "payload": payload},
                       separators=(",", ":")) + "\n").encode()


def parse_message(line: bytes | str) -> tuple[str, dict]:
    doc = json.loads(line)
    if not isinstance(doc, dict) or "type" not in doc:
        raise ValueError("message must be an object with a 'type' field")
    payload = doc.get("payload", {})
    if not isinstance(doc["type"], str) or not isinstance(payload, dict):
        raise ValueError("'type' must be a string and 'payload' an object")
    return doc["type"], payload


def state_payload(ev: StateEvent) -> dict:
    return {"frame_index": ev.frame_index, "t_ms": ev.timestamp_ms,
            "state": ev.state.value, "confidence": ev.confidence,
            "latency_ms": ev.classify_latency_ms}


def state_event_from_payload(payload: dict) -> StateEvent:
    return StateEvent(frame_index=payload["frame_index"],
                      timestamp_ms=payload["t_ms"],
                      state=EyeState.from_wire(payload["state"]),
                      confidence=payload["confidence"],
                      classify_latency_ms=payload["latency_ms"])


class _Client:
    def __init__(self, writer: asyncio.StreamWriter, websocket: bool):
        self.writer = writer
        self.websocket = websocket
        self.queue: asyncio.Queue[bytes | None] = asyncio.Queue(CLIENT_QUEUE_LIMIT)
        self.sender: asyncio.Task | None = None


def _ws_accept_key(key: str) -> str:
    digest = hashlib.sha1((key + _WS_GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def _ws_frame(payload: bytes, opcode: int = 0x1) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([n])
    elif n < 65536:
        head += bytes([126]) + struct.pack(">H", n)
    else:
        head += bytes([127]) + struct.pack(">Q", n)
    return head + payload


async def _ws_read_frame(reader: asyncio.StreamReader) -> tuple[int, bytes]:
    """Returns (opcode, payload) of one client frame; unmasks the payload."""
    b0, b1 = await reader.readexactly(2)
    opcode = b0 & 0x0F
    masked = bool(b1 & 0x80)
    n = b1 & 0x7F
    if n == 126:
        n = struct.unpack(">H", await reader.readexactly(2))[0]
    elif n == 127:
        n = struct.unpack(">Q", await reader.readexactly(8))[0]
    mask = await reader.readexactly(4) if masked else b"\x00" * 4
    data = await reader.readexactly(n)
    if masked:
        data = bytes(c ^ mask[i % 4] for i, c in enumerate(data))
    return opcode, data


class Gateway:
    """Broadcast hub plus optional simulated-input decoder.

    In simulated mode the gateway owns a Decoder fed by inbound sim_state
    messages. In pipeline mode events are pushed in from a pipeline thread
    through feed_threadsafe.
    """

    def __init__(self, config: StreamConfig, dictionary: Dictionary | None = None,
                 simulated: bool = False):
        self.config = config
        self.dictionary = dictionary or Dictionary.default()
        self.simulated = simulated
        self._decoder = Decoder(config, self.dictionary) if simulated else None
        self._sim_index = 0
        self._clients: set[_Client] = set()
        self._server: asyncio.AbstractServer | None = None
        self._loop: asyncio.AbstractEventLoop | None = None
        self.port: int | None = None

    # -- lifecycle ----------------------------------------------------------

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> None:
        self._loop = asyncio.get_running_loop()
        self._server = await asyncio.start_server(self._handle_client, host, port)
        self.port = self._server.sockets[0].getsockname()[1]

    async def stop(self) -> None:
        for client in list(self._clients):
            await self._drop_client(client)
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None

    # -- broadcasting ---------------------------------------------------------

    def _broadcast(self, msg_type: str, payload: dict) -> None:
        line = encode_message(msg_type, payload)
        for client in list(self._clients):
            try:
                client.queue.put_nowait(line)
            except asyncio.QueueFull:
                # Slow consumer: cut it loose instead of stalling the stream.
                self._clients.discard(client)
                if client.sender is not None:
                    client.sender.cancel()

    def dispatch(self, event: DecodeEvent) -> None:
        """Broadcast one decode event (echoes as 'state', rest as 'event')."""
        if isinstance(event, StateEcho):
            self._broadcast("state", state_payload(event.event))
        else:
            self._broadcast("event", event.to_payload())

    def feed_threadsafe(self, event: DecodeEvent) -> None:
        """Entry point for pipeline threads: schedule dispatch on the loop."""
        if self._loop is None:
            raise RuntimeError("gateway is not started")
        self._loop.call_soon_threadsafe(self.dispatch, event)

    # -- simulated input --------------------------------------------------------

    def _feed_sim_state(self, payload: dict) -> None:
        state = EyeState.from_wire(payload["state"])
        t_ms = payload.get("t_ms")
        if t_ms is None:
            t_ms = int(self._sim_index * self.config.frame_period_ms)
        ev = StateEvent(frame_index=self._sim_index, timestamp_ms=int(t_ms),
                        state=state, confidence=1.0, classify_latency_ms=0.0)
        self._sim_index += 1
        self._broadcast("state", state_payload(ev))
        assert self._decoder is not None
        for decoded in self._decoder.feed(ev):
            self.dispatch(decoded)

    # -- per-client plumbing ----------------------------------------------------

    async def _drop_client(self, client: _Client) -> None:
        self._clients.discard(client)
        if client.sender is not None:
            client.sender.cancel()
        try:
            client.writer.close()
            await client.writer.wait_closed()
        except (ConnectionError, OSError):
            pass

    async def _sender_loop(self, client: _Client) -> None:
        try:
            while True:
                line = await client.queue.get()
                if line is None:
                    break
                if client.websocket:
                    client.writer.write(_ws_frame(line.rstrip(b"\n")))
                else:
                    client.writer.write(line)
                await client.writer.drain()
        except (ConnectionError, OSError, asyncio.CancelledError):
            pass

    def _handle_inbound(self, client: _Client, raw: bytes) -> None:
        if not raw.strip():
            return
        try:
            msg_type, payload = parse_message(raw)
            if msg_type == "sim_state":
                if not self.simulated:
                    raise ValueError("sim_state requires simulated mode")
                self._feed_sim_state(payload)
            else:
                raise ValueError(f"unsupported inbound type {msg_type!r}")
        except (ValueError, KeyError, TypeError) as exc:
            # Per-message reject; the connection stays usable.
            try:
                client.queue.put_nowait(
                    encode_message("error", {"message": str(exc)}))
            except asyncio.QueueFull:
                pass

    async def _handshake_websocket(self, reader: asyncio.StreamReader,
                                   writer: asyncio.StreamWriter) -> bool:
        headers = {}
        while True:
            line = await reader.readline()
            if line in (b"\r\n", b"\n", b""):
                break
            name, _, value = line.decode("latin1").partition(":")
            headers[name.strip().lower()] = value.strip()
        key = headers.get("sec-websocket-key")
        if key is None or "upgrade" not in headers.get("connection", "").lower():
            writer.write(b"HTTP/1.1 400 Bad Request\r\n\r\n")
            await writer.drain()
            return False
        writer.write((
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {_ws_accept_key(key)}\r\n"
            "\r\n"
        ).encode())
        await writer.drain()
        return True

    async def _handle_client(self, reader: asyncio.StreamReader,
                             writer: asyncio.StreamWriter) -> None:
        try:
            first = await asyncio.wait_for(reader.readline(), SNIFF_TIMEOUT_S)
            if not first:   # closed before sending anything
                writer.close()
                return
        except asyncio.TimeoutError:
            first = None    # silent observer: plain NDJSON
        except (ConnectionError, OSError):
            writer.close()
            return

        websocket = first is not None and first.startswith(b"GET ")
        if websocket and not await self._handshake_websocket(reader, writer):
            writer.close()
            return

        client = _Client(writer, websocket)
        client.queue.put_nowait(encode_message("config", self.config.to_dict()))
        client.sender = asyncio.ensure_future(self._sender_loop(client))
        self._clients.add(client)

        try:
            if websocket:
                while True:
                    opcode, data = await _ws_read_frame(reader)
                    if opcode == 0x8:          # close
                        break
                    if opcode == 0x9:          # ping -> pong
                        client.writer.write(_ws_frame(data, opcode=0xA))
                        continue
                    if opcode in (0x1, 0x2):
                        self._handle_inbound(client, data)
            else:
                if first is not None:
                    self._handle_inbound(client, first)
                while True:
                    line = await reader.readline()
                    if not line:
                        break
                    self._handle_inbound(client, line)
        except (asyncio.IncompleteReadError, ConnectionError, OSError):
            pass
        finally:
            await self._drop_client(client)


def serve(config: StreamConfig, dictionary: Dictionary | None = None,
          host: str = "127.0.0.1", port: int = 42700,
          simulated: bool = False,
          source: FrameSource | None = None,
          classifier: Classifier | None = None,
          ready: Optional[Callable[[int], None]] = None) -> None:
    """Run the gateway until interrupted.

    Simulated mode needs no source; pipeline mode drives the live pipeline
    in a worker thread and broadcasts everything it produces. The optional
    ready callback receives the bound port once listening.
    """
    if not simulated and (source is None or classifier is None):
        raise ValueError("pipeline mode needs a source and a classifier")

    async def main() -> None:
        gateway = Gateway(config, dictionary, simulated=simulated)
        await gateway.start(host, port)
        assert gateway.port is not None
        if ready is not None:
            ready(gateway.port)
        stop = asyncio.Event()
        if not simulated:
            # The gateway keeps serving after the stream ends; clients are
            # live observers and may reconnect for the next run.
            threading.Thread(
                target=lambda: run_pipeline(source, classifier, config,
                                            dictionary=gateway.dictionary,
                                            sink=gateway.feed_threadsafe,
                                            mode="live", emit_echoes=True),
                name="pipeline", daemon=True,
            ).start()
        try:
            await stop.wait()
        finally:
            await gateway.stop()

    asyncio.run(main())
