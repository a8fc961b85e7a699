"""Byte-stream loopback transport mirroring the simulator's channel API.

Carries real payloads over a local socket pair for demos. Framing is
[channel id: 1 byte][length: 4 bytes big-endian][payload]. Messages are
picked from per-channel queues in priority order, so the wire ordering
matches what the simulator would schedule, minus timing.
"""
from __future__ import annotations

import select
import socket
import struct
from collections import deque
from typing import Mapping

from .errors import SimulationError, ValidationError
from .telestream import ChannelConfig

_HEADER = struct.Struct(">BI")


class LoopbackTransport:
    """In-process two-endpoint transport over socketpair."""

    def __init__(self, channels: Mapping[str, ChannelConfig]):
        if not channels:
            raise ValidationError("loopback transport needs at least one channel")
        self.channels = dict(channels)
        self._order = sorted(channels, key=lambda n: channels[n].priority)
        self._ids = {name: i for i, name in enumerate(self._order)}
        self._names = {i: name for name, i in self._ids.items()}
        self._queues: dict[str, deque[bytes]] = {name: deque() for name in channels}
        self._left, self._right = socket.socketpair()
        self._left.setblocking(False)
        self._right.setblocking(False)
        self._rx = b""
        self._closed = False

    def offer(self, channel: str, payload: bytes) -> None:
        if self._closed:
            raise SimulationError("transport closed")
        if channel not in self._queues:
            raise ValidationError(f"unknown channel {channel!r}")
        self._queues[channel].append(bytes(payload))

    def _next_frame(self) -> bytes | None:
        for name in self._order:
            queue = self._queues[name]
            if queue:
                payload = queue.popleft()
                return _HEADER.pack(self._ids[name], len(payload)) + payload
        return None

    def step(self, timeout: float = 0.1) -> list[tuple[str, bytes]]:
        """Flush queued messages through the socket; return deliveries."""
        if self._closed:
            raise SimulationError("transport closed")
        while True:
            frame = self._next_frame()
            if frame is None:
                break
            self._left.sendall(frame)
        delivered: list[tuple[str, bytes]] = []
        while True:
            readable, _, _ = select.select([self._right], [], [], timeout)
            if not readable:
                break
            chunk = self._right.recv(65536)
            if not chunk:
                break
            self._rx += chunk
            timeout = 0.0
        while len(self._rx) >= _HEADER.size:
            channel_id, length = _HEADER.unpack_from(self._rx)
            if len(self._rx) < _HEADER.size + length:
                break
            payload = self._rx[_HEADER.size:_HEADER.size + length]
            self._rx = self._rx[_HEADER.size + length:]
            delivered.append((self._names[channel_id], payload))
        return delivered

    def close(self) -> None:
        if not self._closed:
            self._left.close()
            self._right.close()
            self._closed = True

    def __enter__(self) -> "LoopbackTransport":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
