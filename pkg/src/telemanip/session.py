"""Asyncio TCP session for the framed wire protocol.

One session owns the listening socket and at most two peers, typically
an operator console and a sim or teleop source. Incoming messages are
routed by type: control inputs (skeleton frames, gamepad snapshots)
land in a freshest-wins slot consumed by the local control loop, while
telemetry is fanned out to the other peers through bounded drop-oldest
queues. Heartbeat acks go out every 500 ms, and a peer that vanishes
surfaces as a session event rather than an exception.
"""

from __future__ import annotations

import asyncio
import time
from collections import deque

from .protocol import (
    MSG_ACK,
    MSG_GAMEPAD,
    MSG_SKELETON,
    Ack,
    FrameDecoder,
    ProtocolError,
    encode,
    message_type,
)

DEFAULT_PORT = 7447
HEARTBEAT_INTERVAL = 0.5
STALE_AFTER = 0.1
TELEMETRY_DEPTH = 64
MAX_PEERS = 2

CONTROL_TYPES = (MSG_SKELETON, MSG_GAMEPAD)


class SessionError(RuntimeError):
    pass


class FreshestWins:
    """Single-slot control-input channel: replace, never queue.

    A slow consumer always observes the newest frame offered so far,
    and a frame that sat unconsumed longer than stale_after is dropped
    instead of being acted on late.
    """

    def __init__(self, stale_after: float = STALE_AFTER, clock=time.monotonic):
        self.stale_after = stale_after
        self.clock = clock
        self.newest_timestamp = float("-inf")
        self._slot = None
        self._arrived = 0.0
        self._unread = False

    def offer(self, message) -> bool:
        """Keep the message unless one with a newer timestamp already arrived."""
        if message.timestamp < self.newest_timestamp:
            return False
        self.newest_timestamp = message.timestamp
        self._slot = message
        self._arrived = self.clock()
        self._unread = True
        return True

    def take(self):
        """Return the newest unconsumed message, or None if empty or stale."""
        if not self._unread:
            return None
        self._unread = False
        if self.clock() - self._arrived > self.stale_after:
            return None
        return self._slot


class _Peer:
    """One connected socket with its outbound drop-oldest queue."""

    def __init__(self, writer: asyncio.StreamWriter, depth: int):
        self.writer = writer
        self.queue: deque = deque(maxlen=depth)
        self.wake = asyncio.Event()
        addr = writer.get_extra_info("peername")
        self.name = f"{addr[0]}:{addr[1]}" if addr else "unknown"

    def send(self, message) -> None:
        self.queue.append(message)
        self.wake.set()

    async def pump(self) -> None:
        try:
            while True:
                await self.wake.wait()
                self.wake.clear()
                while self.queue:
                    self.writer.write(encode(self.queue.popleft()))
                await self.writer.drain()
        except (ConnectionError, OSError):
            pass


class TcpSession:
    """Framed-stream server owning the control and telemetry channels."""

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = DEFAULT_PORT,
        heartbeat_interval: float = HEARTBEAT_INTERVAL,
        stale_after: float = STALE_AFTER,
        telemetry_depth: int = TELEMETRY_DEPTH,
        clock=time.monotonic,
    ):
        self.host = host
        self.port = port
        self.heartbeat_interval = heartbeat_interval
        self.telemetry_depth = telemetry_depth
        self.clock = clock
        self.control = FreshestWins(stale_after, clock)
        self.events: list[tuple[float, str]] = []
        self.routed = 0
        self.heartbeats = 0
        self._peers: list[_Peer] = []
        self._server: asyncio.base_events.Server | None = None
        self._beat_task: asyncio.Task | None = None
        self._handlers: set[asyncio.Task] = set()

    @property
    def peer_count(self) -> int:
        return len(self._peers)

    async def start(self) -> None:
        try:
            self._server = await asyncio.start_server(self._handle, self.host, self.port)
        except OSError as exc:
            raise SessionError(f"cannot bind {self.host}:{self.port}: {exc}") from exc
        self.port = self._server.sockets[0].getsockname()[1]
        self._beat_task = asyncio.create_task(self._heartbeat())
        self._note("listening")

    async def stop(self) -> None:
        if self._beat_task is not None:
            self._beat_task.cancel()
            self._beat_task = None
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None
        for peer in list(self._peers):
            peer.writer.close()
        if self._handlers:
            await asyncio.wait(self._handlers, timeout=1.0)
        self._note("stopped")

    def publish(self, message) -> None:
        """Queue telemetry from the local loop toward every peer."""
        for peer in self._peers:
            peer.send(message)

    def take_control(self):
        """Newest pending control input, if any; consumed at tick boundaries."""
        return self.control.take()

    def _note(self, name: str) -> None:
        self.events.append((self.clock(), name))

    def _route(self, message, origin: _Peer) -> None:
        self.routed += 1
        kind = message_type(message)
        if kind in CONTROL_TYPES:
            self.control.offer(message)
        elif kind != MSG_ACK:
            for peer in self._peers:
                if peer is not origin:
                    peer.send(message)

    async def _heartbeat(self) -> None:
        while True:
            await asyncio.sleep(self.heartbeat_interval)
            beat = Ack(timestamp=self.clock())
            for peer in self._peers:
                peer.send(beat)
            self.heartbeats += 1

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        task = asyncio.current_task()
        if task is not None:
            self._handlers.add(task)
            task.add_done_callback(self._handlers.discard)
        if len(self._peers) >= MAX_PEERS:
            self._note("connection_refused")
            writer.close()
            return
        peer = _Peer(writer, self.telemetry_depth)
        self._peers.append(peer)
        self._note(f"peer_connected {peer.name}")
        pump = asyncio.create_task(peer.pump())
        decoder = FrameDecoder()
        try:
            while True:
                data = await reader.read(4096)
                if not data:
                    break
                for message in decoder.feed(data):
                    self._route(message, peer)
        except (ConnectionError, OSError):
            pass
        except ProtocolError as exc:
            self._note(f"protocol_error {peer.name}: {exc}")
        finally:
            pump.cancel()
            self._peers.remove(peer)
            self._note(f"peer_disconnected {peer.name}")
            writer.close()
