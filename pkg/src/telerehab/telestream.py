"""Deterministic two-peer streaming simulation with prioritized channels.

Models the transport of a live therapy session: a control channel, a
skeleton-frame channel (both reliable-ordered), and audio/depth channels
(unreliable), sharing one bottleneck link per direction. Large messages
fragment at the MTU and the scheduler re-picks the highest-priority
queue between fragments, so a bulky depth frame never blocks skeleton
data for more than one fragment. A rate controller drops the depth frame
rate under backlog and climbs back only when the link has headroom.

Everything is event-driven off a single seeded RNG, so identical inputs
replay identical runs. Public times (offers, step targets, QoS windows)
are seconds since the connection was established. Acknowledgements
return out of band: they consume no bandwidth and are never lost, a
deliberate simplification that keeps retransmission state small.
"""
from __future__ import annotations

import csv
import enum
import heapq
import io
import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ChannelFailure, ConnectionFailed, SimulationError, ValidationError

log = logging.getLogger(__name__)

MTU_BYTES = 1500
MAX_ATTEMPTS = 10
HANDSHAKE_MESSAGES = 6
DEPTH_FPS_LEVELS = (30, 15, 10, 5, 1, 0)
SKELETON_FPS_LEVELS = (30, 20, 15)
ADAPT_INTERVAL = 1.0
BACKLOG_DOWN_FACTOR = 1.0
BACKLOG_UP_FACTOR = 0.1
UP_WINDOWS = 3
CAPACITY_MARGIN = 0.9

CONTROL, SKELETON, AUDIO, DEPTH = "control", "skeleton", "audio", "depth"


class Reliability(enum.Enum):
    ReliableOrdered = "reliable-ordered"
    Unreliable = "unreliable"


@dataclass(frozen=True)
class ChannelConfig:
    name: str
    reliability: Reliability
    priority: int
    nominal_rate: float = 0.0
    payload_size: int = 256

    def __post_init__(self):
        if self.name not in (CONTROL, SKELETON, AUDIO, DEPTH):
            raise ValidationError(f"unknown channel name {self.name!r}")
        if self.name in (CONTROL, SKELETON) and self.reliability is not Reliability.ReliableOrdered:
            raise ValidationError(f"channel {self.name} must be reliable-ordered")
        if self.name in (AUDIO, DEPTH) and self.reliability is not Reliability.Unreliable:
            raise ValidationError(f"channel {self.name} must be unreliable")
        if self.nominal_rate < 0 or self.payload_size <= 0:
            raise ValidationError("nominal_rate must be >= 0 and payload_size positive")


def default_channels(media: bool = True) -> dict[str, ChannelConfig]:
    """Sending-channel set: control alone, or control plus the media lanes."""
    channels = {CONTROL: ChannelConfig(CONTROL, Reliability.ReliableOrdered, 0, 0.0, 256)}
    if media:
        channels[SKELETON] = ChannelConfig(SKELETON, Reliability.ReliableOrdered, 1, 30.0, 1024)
        channels[AUDIO] = ChannelConfig(AUDIO, Reliability.Unreliable, 2, 50.0, 160)
        channels[DEPTH] = ChannelConfig(DEPTH, Reliability.Unreliable, 3, 30.0, 320 * 240 * 2)
    return channels


@dataclass(frozen=True)
class NetworkModel:
    """Symmetric link parameters; trace entries override bandwidth and loss
    from their start time (media seconds) onward."""

    bandwidth: float
    delay: float
    jitter: float = 0.0
    loss: float = 0.0
    seed: int = 0
    trace: tuple[tuple[float, float, float], ...] = ()  # (start_t, bandwidth, loss)

    def __post_init__(self):
        if self.bandwidth <= 0 or self.delay < 0 or self.jitter < 0:
            raise ValidationError("bandwidth must be positive; delay and jitter non-negative")
        if not 0.0 <= self.loss <= 1.0:
            raise ValidationError(f"loss must lie in [0, 1], got {self.loss}")
        object.__setattr__(self, "trace", tuple(tuple(seg) for seg in self.trace))

    def at(self, t: float) -> tuple[float, float]:
        bandwidth, loss = self.bandwidth, self.loss
        for start, bw, lo in self.trace:
            if t >= start:
                bandwidth, loss = bw, lo
        return bandwidth, loss


@dataclass(frozen=True)
class ChannelQos:
    sent: int
    delivered: int
    ratio: float
    mean_latency: float
    p95_latency: float
    achieved_rate: float


@dataclass(frozen=True)
class QosReport:
    peers: Mapping[str, Mapping[str, ChannelQos]]

    def __getitem__(self, role: str) -> Mapping[str, ChannelQos]:
        return self.peers[role]


def _p95(latencies: Sequence[float]) -> float:
    if not latencies:
        return 0.0
    ordered = sorted(latencies)
    rank = max(0, math.ceil(0.95 * len(ordered)) - 1)
    return ordered[rank]


@dataclass
class _Message:
    id: int
    sender: str
    channel: str
    size: int
    offer_t: float
    seq: int
    reliable: bool
    attempts: int = 0
    remaining: int = 0
    discarded: bool = False  # acked, flushed, or source-dropped


class _Peer:
    """Per-participant state: outbound queues, rate controller, rx buffers."""

    def __init__(self, role: str, channels: Mapping[str, ChannelConfig]):
        if CONTROL not in channels:
            raise ValidationError(f"peer {role!r} needs a control channel")
        priorities = [c.priority for c in channels.values()]
        if len(set(priorities)) != len(priorities):
            raise ValidationError(f"peer {role!r} channel priorities must be distinct")
        self.role = role
        self.channels = dict(channels)
        self.order = sorted(channels, key=lambda n: channels[n].priority)
        self.queues: dict[str, deque[_Message]] = {name: deque() for name in channels}
        self.seq: dict[str, int] = {name: 0 for name in channels}
        self.pending: dict[tuple[str, int], _Message] = {}
        self.link_busy = False
        self.depth_idx = 0
        self.skeleton_idx = 0
        self.recover_windows = 0
        self.window_tx_bits = 0.0
        self.window_busy = 0.0
        # state for reliable traffic arriving at this peer, keyed by channel
        self.rx_expected: dict[str, int] = {}
        self.rx_buffer: dict[str, dict[int, tuple[int, float]]] = {}
        self.rx_seen: dict[str, set[int]] = {}

    @property
    def depth_fps(self) -> int:
        return DEPTH_FPS_LEVELS[self.depth_idx]

    @property
    def skeleton_fps(self) -> int:
        return SKELETON_FPS_LEVELS[self.skeleton_idx]

    def effective_rate(self, name: str) -> float:
        config = self.channels[name]
        if name == DEPTH:
            return min(config.nominal_rate, float(self.depth_fps))
        if name == SKELETON:
            return min(config.nominal_rate, float(self.skeleton_fps))
        return config.nominal_rate

    def demand_bps(self, depth_idx: int | None = None, skeleton_idx: int | None = None) -> float:
        saved = (self.depth_idx, self.skeleton_idx)
        if depth_idx is not None:
            self.depth_idx = depth_idx
        if skeleton_idx is not None:
            self.skeleton_idx = skeleton_idx
        total = sum(
            self.effective_rate(name) * config.payload_size * 8
            for name, config in self.channels.items()
        )
        self.depth_idx, self.skeleton_idx = saved
        return total

    def backlog_bits(self) -> float:
        return sum(8 * m.remaining for q in self.queues.values() for m in q if not m.discarded)

    def next_queued(self) -> _Message | None:
        for name in self.order:
            queue = self.queues[name]
            while queue and queue[0].discarded:
                queue.popleft()
            if queue:
                return queue[0]
        return None


class StreamSession:
    """One simulated two-peer connection. Create via connect()."""

    def __init__(
        self,
        therapist_channels: Mapping[str, ChannelConfig],
        patient_channels: Mapping[str, ChannelConfig],
        net: NetworkModel,
    ):
        self.net = net
        self.peers = {
            "therapist": _Peer("therapist", therapist_channels),
            "patient": _Peer("patient", patient_channels),
        }
        self._rng = np.random.default_rng(net.seed)
        self._heap: list[tuple[float, int, str, tuple]] = []
        self._tie = 0
        self._now = 0.0  # absolute simulation time
        self._established_at: float | None = None
        self._handshake_count = 0
        self._failed: str | None = None
        self._next_msg_id = 1
        self._sent: dict[tuple[str, str], int] = {}
        self._delivered: dict[tuple[str, str], int] = {}
        self._latencies: dict[tuple[str, str], list[float]] = {}
        self._media_end = 0.0
        self.events: list[str] = []

    # -- plumbing ----------------------------------------------------------

    def _schedule(self, t: float, kind: str, data: tuple = ()) -> None:
        heapq.heappush(self._heap, (t, self._tie, kind, data))
        self._tie += 1

    def _log(self, t: float, text: str) -> None:
        self.events.append(f"{self._media_t(t):.6f} {text}")

    def _other(self, role: str) -> _Peer:
        return self.peers["patient" if role == "therapist" else "therapist"]

    @property
    def established(self) -> bool:
        return self._established_at is not None

    def _media_t(self, absolute: float) -> float:
        return absolute - (self._established_at or 0.0)

    def _absolute(self, media_t: float) -> float:
        return media_t + (self._established_at or 0.0)

    def depth_fps(self, role: str = "patient") -> int:
        return self.peers[role].depth_fps

    def skeleton_fps(self, role: str = "patient") -> int:
        return self.peers[role].skeleton_fps

    # -- message lifecycle ---------------------------------------------------

    def _make_message(self, role: str, channel: str, size: int | None, t: float) -> _Message:
        peer = self.peers[role]
        config = peer.channels[channel]
        peer.seq[channel] += 1
        message = _Message(
            id=self._next_msg_id,
            sender=role,
            channel=channel,
            size=size if size is not None else config.payload_size,
            offer_t=t,
            seq=peer.seq[channel],
            reliable=config.reliability is Reliability.ReliableOrdered,
        )
        self._next_msg_id += 1
        self._sent[(role, channel)] = self._sent.get((role, channel), 0) + 1
        return message

    def _admit(self, message: _Message, t: float) -> None:
        """Source gate plus enqueue: depth frames die here when the rate
        controller has shut the lane off."""
        peer = self.peers[message.sender]
        if message.channel == DEPTH and peer.depth_fps == 0:
            message.discarded = True
            self._log(t, f"source-drop {message.channel}#{message.seq} from {message.sender}")
            return
        self._log(t, f"offer {message.channel}#{message.seq} from {message.sender}")
        self._enqueue(message, t)

    def _enqueue(self, message: _Message, t: float) -> None:
        peer = self.peers[message.sender]
        message.remaining = message.size
        message.attempts += 1
        peer.queues[message.channel].append(message)
        if not peer.link_busy:
            self._start_fragment(peer, t)

    def _start_fragment(self, peer: _Peer, t: float) -> None:
        message = peer.next_queued()
        if message is None:
            peer.link_busy = False
            return
        peer.link_busy = True
        bandwidth, _ = self.net.at(self._media_t(t))
        frag = min(MTU_BYTES, message.remaining)
        self._schedule(t + frag * 8 / bandwidth, "frag_done", (peer.role, frag, message))

    # -- event handlers ------------------------------------------------------

    def _on_frag_done(self, t: float, role: str, frag: int, message: _Message) -> None:
        peer = self.peers[role]
        peer.window_tx_bits += frag * 8
        peer.window_busy += frag * 8 / self.net.at(self._media_t(t))[0]
        message.remaining -= frag
        if message.discarded:
            # flushed or acked while its fragment was on the wire
            queue = peer.queues[message.channel]
            if queue and queue[0] is message:
                queue.popleft()
        elif message.remaining <= 0:
            queue = peer.queues[message.channel]
            if queue and queue[0] is message:
                queue.popleft()
            self._complete_transmission(message, t)
        self._start_fragment(peer, t)

    def _complete_transmission(self, message: _Message, t: float) -> None:
        _, loss = self.net.at(self._media_t(t))
        lost = bool(self._rng.random() < loss) if loss > 0 else False
        if message.reliable:
            self.peers[message.sender].pending[(message.channel, message.seq)] = message
            # strictly above the worst-case ack round trip (delay + jitter
            # out, delay back) or the timer races the ack it waits for
            rto = 2 * (self.net.delay + self.net.jitter) + max(0.5 * self.net.delay, 1e-3)
            self._schedule(t + rto, "rto", (message.sender, message.channel, message.seq))
        if lost:
            self._log(t, f"lost {message.channel}#{message.seq} from {message.sender} attempt {message.attempts}")
            return
        arrival = t + self.net.delay
        if self.net.jitter > 0:
            arrival += float(self._rng.uniform(-self.net.jitter, self.net.jitter))
        self._schedule(arrival, "arrival", (message.sender, message.channel, message.seq, message.id, message.offer_t))

    def _on_arrival(self, t: float, sender: str, channel: str, seq: int, msg_id: int, offer_t: float) -> None:
        receiver = self._other(sender)
        config = self.peers[sender].channels[channel]
        if config.reliability is Reliability.ReliableOrdered:
            self._schedule(t + self.net.delay, "ack", (sender, channel, seq))
            seen = receiver.rx_seen.setdefault(channel, set())
            if seq in seen:
                return
            seen.add(seq)
            expected = receiver.rx_expected.get(channel, 1)
            buffer = receiver.rx_buffer.setdefault(channel, {})
            buffer[seq] = (msg_id, offer_t)
            while expected in buffer:
                m_id, m_offer = buffer.pop(expected)
                self._deliver(t, sender, channel, m_id, m_offer)
                expected += 1
            receiver.rx_expected[channel] = expected
        else:
            self._deliver(t, sender, channel, msg_id, offer_t)

    def _deliver(self, t: float, sender: str, channel: str, msg_id: int, offer_t: float) -> None:
        self._delivered[(sender, channel)] = self._delivered.get((sender, channel), 0) + 1
        self._latencies.setdefault((sender, channel), []).append(t - offer_t)
        self._log(t, f"deliver {channel}#{msg_id} from {sender} latency {t - offer_t:.6f}")
        if self._established_at is None:
            self._handshake_progress(t, sender)

    def _on_ack(self, t: float, sender: str, channel: str, seq: int) -> None:
        message = self.peers[sender].pending.pop((channel, seq), None)
        if message is not None:
            message.discarded = True

    def _on_rto(self, t: float, sender: str, channel: str, seq: int) -> None:
        peer = self.peers[sender]
        message = peer.pending.get((channel, seq))
        if message is None or message.discarded:
            return
        if message.attempts >= MAX_ATTEMPTS:
            self._failed = f"channel {channel} gave up after {message.attempts} attempts (seq {seq})"
            self._log(t, f"failure {self._failed}")
            return
        del peer.pending[(channel, seq)]
        self._log(t, f"retransmit {channel}#{seq} from {sender} attempt {message.attempts + 1}")
        self._enqueue(message, t)

    # -- handshake -----------------------------------------------------------

    def _handshake_progress(self, t: float, sender: str) -> None:
        self._handshake_count += 1
        if self._handshake_count >= HANDSHAKE_MESSAGES:
            self._established_at = t
            self.events.append("0.000000 established")
            return
        next_sender = "patient" if sender == "therapist" else "therapist"
        message = self._make_message(next_sender, CONTROL, None, t)
        self._enqueue(message, t)

    def _run_handshake(self) -> None:
        first = self._make_message("therapist", CONTROL, None, 0.0)
        self._enqueue(first, 0.0)
        while self._heap and self._established_at is None and self._failed is None:
            self._process_next()
        if self._failed is not None or self._established_at is None:
            raise ConnectionFailed(self._failed or "handshake never completed")

    # -- core loop -------------------------------------------------------------

    def _process_next(self) -> None:
        t, _, kind, data = heapq.heappop(self._heap)
        self._now = t
        if kind == "frag_done":
            self._on_frag_done(t, *data)
        elif kind == "arrival":
            self._on_arrival(t, *data)
        elif kind == "ack":
            self._on_ack(t, *data)
        elif kind == "rto":
            self._on_rto(t, *data)
        elif kind == "admit":
            self._admit(data[0], t)
        elif kind == "source":
            self._on_source(t, *data)
        elif kind == "adapt":
            self._on_adapt(t, *data)
        else:  # pragma: no cover - exhaustive kinds
            raise SimulationError(f"unknown event kind {kind}")

    def _check_failure(self) -> None:
        if self._failed is not None:
            raise ChannelFailure(self._failed)

    # -- public API --------------------------------------------------------------

    def offer(self, channel: str, t: float = 0.0, size: int | None = None, sender: str = "patient") -> int:
        """Queue a message at media time t; returns the message id."""
        if not self.established:
            raise SimulationError("offer before connect")
        self._check_failure()
        if sender not in self.peers:
            raise ValidationError(f"unknown peer {sender!r}")
        peer = self.peers[sender]
        if channel not in peer.channels:
            raise ValidationError(f"peer {sender!r} has no channel {channel!r}")
        absolute = self._absolute(t)
        if absolute < self._now:
            raise SimulationError(f"offer at media t={t} is in the simulated past")
        message = self._make_message(sender, channel, size, absolute)
        if absolute <= self._now:
            self._admit(message, absolute)
        else:
            self._schedule(absolute, "admit", (message,))
        return message.id

    def step(self, until_media_t: float) -> None:
        """Advance the simulation to the given media time."""
        if not self.established:
            raise SimulationError("step before connect")
        limit = self._absolute(until_media_t)
        if limit < self._now:
            raise SimulationError("cannot step backwards")
        while self._heap and self._heap[0][0] <= limit and self._failed is None:
            self._process_next()
        self._check_failure()
        self._now = max(self._now, limit)
        self._media_end = max(self._media_end, until_media_t)

    # -- sources and adaptation ----------------------------------------------------

    def _on_source(self, t: float, role: str, channel: str, end_t: float) -> None:
        peer = self.peers[role]
        message = self._make_message(role, channel, None, t)
        self._admit(message, t)
        rate = peer.effective_rate(channel)
        interval = 1.0 / rate if rate > 0 else ADAPT_INTERVAL
        nxt = t + interval
        if nxt <= end_t:
            self._schedule(nxt, "source", (role, channel, end_t))

    def _on_adapt(self, t: float, role: str, end_t: float) -> None:
        peer = self.peers[role]
        backlog = peer.backlog_bits()
        demand = peer.demand_bps()
        busy_fraction = peer.window_busy / ADAPT_INTERVAL
        capacity = peer.window_tx_bits / busy_fraction if busy_fraction > 0 else float("inf")
        peer.window_tx_bits = 0.0
        peer.window_busy = 0.0

        if demand > 0 and backlog > BACKLOG_DOWN_FACTOR * demand:
            peer.recover_windows = 0
            if peer.depth_idx + 1 < len(DEPTH_FPS_LEVELS):
                peer.depth_idx += 1
                self._flush_depth(peer, t)
                self._log(t, f"adapt {role} depth down to {peer.depth_fps} fps")
            elif DEPTH in peer.channels and peer.depth_fps == 0 and peer.skeleton_idx + 1 < len(SKELETON_FPS_LEVELS):
                peer.skeleton_idx += 1
                self._log(t, f"adapt {role} skeleton down to {peer.skeleton_fps} fps")
        elif demand > 0 and backlog < BACKLOG_UP_FACTOR * demand:
            peer.recover_windows += 1
            if peer.recover_windows >= UP_WINDOWS:
                if peer.skeleton_idx > 0:
                    if peer.demand_bps(skeleton_idx=peer.skeleton_idx - 1) <= CAPACITY_MARGIN * capacity:
                        peer.skeleton_idx -= 1
                        self._log(t, f"adapt {role} skeleton up to {peer.skeleton_fps} fps")
                elif peer.depth_idx > 0:
                    if peer.demand_bps(depth_idx=peer.depth_idx - 1) <= CAPACITY_MARGIN * capacity:
                        peer.depth_idx -= 1
                        self._log(t, f"adapt {role} depth up to {peer.depth_fps} fps")
        else:
            peer.recover_windows = 0

        nxt = t + ADAPT_INTERVAL
        if nxt <= end_t:
            self._schedule(nxt, "adapt", (role, end_t))

    def _flush_depth(self, peer: _Peer, t: float) -> None:
        """Stale depth frames are worthless once the rate drops; discard them."""
        queue = peer.queues.get(DEPTH)
        if not queue:
            return
        stale = sum(1 for m in queue if not m.discarded)
        for message in queue:
            message.discarded = True
        queue.clear()
        if stale:
            self._log(t, f"flush {stale} stale depth frames at {peer.role}")

    def run(self, duration: float) -> None:
        """Generate nominal-rate traffic for the window, then drain."""
        if not self.established:
            raise SimulationError("run before connect")
        if duration <= 0:
            raise ValidationError("duration must be positive")
        end_abs = self._absolute(duration)
        for peer in self.peers.values():
            for name, config in peer.channels.items():
                if config.nominal_rate > 0:
                    self._schedule(self._absolute(0.0), "source", (peer.role, name, end_abs))
            self._schedule(self._absolute(ADAPT_INTERVAL), "adapt", (peer.role, end_abs))
        while self._heap and self._failed is None:
            self._process_next()
        self._check_failure()
        self._media_end = max(self._media_t(self._now), duration)

    # -- reporting ----------------------------------------------------------------

    def qos(self, window: float | None = None) -> QosReport:
        window = window if window is not None else (self._media_end or self._media_t(self._now))
        peers: dict[str, dict[str, ChannelQos]] = {}
        for role, peer in self.peers.items():
            report: dict[str, ChannelQos] = {}
            for name in peer.channels:
                sent = self._sent.get((role, name), 0)
                delivered = self._delivered.get((role, name), 0)
                latencies = self._latencies.get((role, name), [])
                report[name] = ChannelQos(
                    sent=sent,
                    delivered=delivered,
                    ratio=delivered / sent if sent else 1.0,
                    mean_latency=sum(latencies) / len(latencies) if latencies else 0.0,
                    p95_latency=_p95(latencies),
                    achieved_rate=delivered / window if window > 0 else 0.0,
                )
            peers[role] = report
        return QosReport(peers=peers)


def connect(
    therapist_channels: Mapping[str, ChannelConfig],
    patient_channels: Mapping[str, ChannelConfig],
    net: NetworkModel,
) -> StreamSession:
    """Build a session and run the six-message signaling exchange."""
    session = StreamSession(therapist_channels, patient_channels, net)
    session._run_handshake()
    log.info("session established after %.3f s", session._established_at)
    return session


# ----------------------------------------------------------------------
# Scenario documents and QoS serialization
# ----------------------------------------------------------------------

def channel_to_doc(config: ChannelConfig) -> dict:
    return {
        "name": config.name,
        "reliability": config.reliability.value,
        "priority": config.priority,
        "nominal_rate": config.nominal_rate,
        "payload_size": config.payload_size,
    }


def channel_from_doc(doc: Mapping) -> ChannelConfig:
    return ChannelConfig(
        name=doc["name"],
        reliability=Reliability(doc["reliability"]),
        priority=int(doc["priority"]),
        nominal_rate=float(doc.get("nominal_rate", 0.0)),
        payload_size=int(doc.get("payload_size", 256)),
    )


def network_from_doc(doc: Mapping) -> NetworkModel:
    return NetworkModel(
        bandwidth=float(doc["bandwidth"]),
        delay=float(doc["delay"]),
        jitter=float(doc.get("jitter", 0.0)),
        loss=float(doc.get("loss", 0.0)),
        seed=int(doc.get("seed", 0)),
        trace=tuple(
            (float(seg["t"]), float(seg["bandwidth"]), float(seg.get("loss", doc.get("loss", 0.0))))
            for seg in doc.get("trace", ())
        ),
    )


def run_scenario(doc: Mapping) -> tuple[StreamSession, QosReport]:
    """Run a scenario document: network, per-peer channels, optional offers."""
    net = network_from_doc(doc["network"])

    def peer_channels(key: str, media: bool) -> dict[str, ChannelConfig]:
        listed = doc.get("channels", {}).get(key)
        if listed is None:
            return default_channels(media=media)
        return {c["name"]: channel_from_doc(c) for c in listed}

    session = connect(peer_channels("therapist", False), peer_channels("patient", True), net)
    for entry in doc.get("offers", ()):
        session.offer(
            channel=entry["channel"],
            t=float(entry.get("t", 0.0)),
            size=entry.get("size"),
            sender=entry.get("sender", "patient"),
        )
    session.run(float(doc.get("duration", 10.0)))
    return session, session.qos()


def qos_to_doc(report: QosReport) -> dict:
    return {
        role: {
            name: {
                "sent": q.sent,
                "delivered": q.delivered,
                "ratio": q.ratio,
                "mean_latency": q.mean_latency,
                "p95_latency": q.p95_latency,
                "achieved_rate": q.achieved_rate,
            }
            for name, q in channels.items()
        }
        for role, channels in report.peers.items()
    }


def qos_to_csv(report: QosReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["peer", "channel", "sent", "delivered", "ratio", "mean_latency", "p95_latency", "achieved_rate"])
    for role in sorted(report.peers):
        for name, q in sorted(report.peers[role].items()):
            writer.writerow([
                role, name, q.sent, q.delivered, f"{q.ratio:.6f}",
                f"{q.mean_latency:.6f}", f"{q.p95_latency:.6f}", f"{q.achieved_rate:.6f}",
            ])
    return buf.getvalue()
