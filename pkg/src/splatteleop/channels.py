"""Simulated transport: lossy/jittery datagram channel for frames, reliable
ordered channel for control, and motion-to-photon measurement.

Channels run against a virtual microsecond clock owned by the session loop,
so every delivery schedule is a pure function of the LinkModel seed. A
receiver applies the stale-drop rule: a frame whose seq is not greater than
the last delivered one is discarded on arrival.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .fusion import DepthFrame
from .wire import ControlMessage, decode_control, decode_frame, encode_control, encode_frame


class ChannelError(ValueError):
    pass


class VirtualClock:
    """Integer-microsecond clock advanced only by its owner."""

    def __init__(self, start_us: int = 0):
        self.now_us = int(start_us)

    def advance(self, dt_us: int) -> int:
        if dt_us < 0:
            raise ChannelError("clock cannot run backwards")
        self.now_us += int(dt_us)
        return self.now_us


@dataclass(frozen=True)
class LinkModel:
    """One-way delay distribution and loss for the frame stream."""

    one_way_delay_mean_ms: float = 153.47
    jitter_std_ms: float = 33.33
    loss_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.loss_rate < 1.0:
            raise ChannelError(f"loss_rate must lie in [0, 1), got {self.loss_rate}")
        if self.one_way_delay_mean_ms < 0 or self.jitter_std_ms < 0:
            raise ChannelError("delay parameters must be non-negative")

    @classmethod
    def calibrated_m2p(cls, target_mean_ms: float = 153.47, jitter_std_ms: float = 33.33,
                      pipeline_offset_ms: float = 0.0, seed: int = 0) -> "LinkModel":
        """Link whose one-way delay makes end-to-end motion-to-photon land on
        the target once fixed pipeline stages contribute `pipeline_offset_ms`."""
        mean = target_mean_ms - pipeline_offset_ms
        if mean < 0:
            raise ChannelError("pipeline offset exceeds the latency target")
        return cls(one_way_delay_mean_ms=mean, jitter_std_ms=jitter_std_ms, seed=seed)


class FrameSender:
    def __init__(self, channel: "FrameChannel"):
        self._ch = channel

    def send(self, frame: DepthFrame, now_us: int) -> None:
        self._ch._submit(encode_frame(frame), now_us)

    def send_bytes(self, buf: bytes, now_us: int) -> None:
        self._ch._submit(buf, now_us)


class FrameReceiver:
    def __init__(self, channel: "FrameChannel"):
        self._ch = channel
        self.last_seq = -1
        self.received = 0
        self.stale_dropped = 0

    def poll(self, now_us: int) -> list[tuple[int, DepthFrame]]:
        """Frames due by now, stale-dropped, as (deliver_us, frame) pairs."""
        out = []
        for deliver_us, buf in self._ch._due(now_us):
            frame = decode_frame(buf)
            if frame.seq <= self.last_seq:
                self.stale_dropped += 1
                continue
            self.last_seq = frame.seq
            self.received += 1
            out.append((deliver_us, frame))
        return out


class FrameChannel:
    def __init__(self, link: LinkModel):
        self.link = link
        self._rng = np.random.default_rng(link.seed)
        self._queue: list[tuple[int, int, bytes]] = []
        self._count = 0
        self.sent = 0
        self.lost = 0

    def _submit(self, buf: bytes, now_us: int) -> None:
        self.sent += 1
        if self.link.loss_rate > 0 and self._rng.random() < self.link.loss_rate:
            self.lost += 1
            return
        delay_ms = self._rng.normal(self.link.one_way_delay_mean_ms, self.link.jitter_std_ms)
        delay_us = max(0, int(round(delay_ms * 1000.0)))
        heapq.heappush(self._queue, (now_us + delay_us, self._count, buf))
        self._count += 1

    def _due(self, now_us: int):
        out = []
        while self._queue and self._queue[0][0] <= now_us:
            deliver_us, _, buf = heapq.heappop(self._queue)
            out.append((deliver_us, buf))
        return out


def frame_channel(link: LinkModel) -> tuple[FrameSender, FrameReceiver]:
    ch = FrameChannel(link)
    return FrameSender(ch), FrameReceiver(ch)


class ControlSender:
    def __init__(self, channel: "ControlChannel"):
        self._ch = channel

    def send(self, msg: ControlMessage) -> None:
        self._ch._lines.append(encode_control(msg))


class ControlReceiver:
    def __init__(self, channel: "ControlChannel"):
        self._ch = channel
        self._read = 0

    def poll(self) -> list[ControlMessage]:
        out = []
        lines = self._ch._lines
        while self._read < len(lines):
            self._read += 1
            out.append(decode_control(lines[self._read - 1], lineno=self._read))
        return out


class ControlChannel:
    """Reliable ordered byte stream of JSON-lines records (TCP stand-in)."""

    def __init__(self):
        self._lines: list[str] = []


def control_channel() -> tuple[ControlSender, ControlReceiver]:
    ch = ControlChannel()
    return ControlSender(ch), ControlReceiver(ch)


def measure_m2p(trace) -> dict:
    """Motion-to-photon stats from a timeline of events.

    Events are dicts {"kind": input|capture|deliver|present, "id": int,
    "t_us": int}. Latency per id = first present - input. Raises on a
    present without a matching input or on fewer than 30 matched pairs;
    trailing inputs still in flight are tolerated.
    """
    inputs: dict[int, int] = {}
    present: dict[int, int] = {}
    for ev in trace:
        kind, eid, t = ev["kind"], ev["id"], ev["t_us"]
        if kind == "input":
            inputs.setdefault(eid, t)
        elif kind == "present" and eid not in present:
            if eid not in inputs:
                raise ChannelError(f"unmatched present event for id {eid}")
            present[eid] = t
    pairs = [(present[k] - inputs[k]) / 1000.0 for k in present]
    if len(pairs) < 30:
        raise ChannelError(f"need at least 30 matched input->present pairs, got {len(pairs)}")
    arr = np.array(pairs)
    return {
        "count": len(pairs),
        "mean_ms": float(arr.mean()),
        "std_ms": float(arr.std(ddof=1)),
        "min_ms": float(arr.min()),
        "max_ms": float(arr.max()),
    }


def probe_stream_m2p(link: LinkModel, n_frames: int = 1000,
                     frame_interval_us: int = 33_333) -> list[dict]:
    """Synthesize a transport-latency trace: one input per frame at the
    capture tick, frames shipped through the link, presented on delivery.

    Presentation here bypasses stale-drop on purpose: the probe measures the
    transport pipeline, and discarding reordered frames would bias the kept
    delays low.
    """
    ch = FrameChannel(link)
    trace: list[dict] = []
    disparity = np.full((2, 2), 4.0, dtype=np.float32)
    color = np.zeros((2, 2, 3), dtype=np.uint8)

    for i in range(n_frames):
        t = i * frame_interval_us
        trace.append({"kind": "input", "id": i, "t_us": t})
        trace.append({"kind": "capture", "id": i, "t_us": t})
        frame = DepthFrame(seq=i, timestamp_us=t, width=2, height=2,
                           disparity=disparity, color=color)
        ch._submit(encode_frame(frame), t)
    horizon = n_frames * frame_interval_us + 10_000_000
    for deliver_us, buf in ch._due(horizon):
        frame = decode_frame(buf)
        trace.append({"kind": "deliver", "id": frame.seq, "t_us": deliver_us})
        trace.append({"kind": "present", "id": frame.seq, "t_us": deliver_us})
    trace.sort(key=lambda ev: (ev["t_us"], ev["id"]))
    return trace
