"""Wire formats: binary frame datagrams and JSON-lines control records.

Frame datagram layout (little-endian, 27-byte header):

    offset  size  field
    0       4     magic "RFN1"
    4       6     seq (u48)
    10      8     capture timestamp, microseconds (u64)
    18      2     width (u16)
    20      2     height (u16)
    22      1     payload kind (u8)
    23      4     payload length (u32)
    27      ...   payload

DISPARITY_RGB payload = disparity plane (u16, 1/256 units, row-major)
followed by an RGB plane (3 x u8 per pixel). The 1/256 quantization is
lossy: sub-millimeter at desk scale, documented here on purpose.

Control records are one JSON object per line with fields
{"kind": ..., "stamp_us": ..., "body": {...}}; unknown kinds are rejected.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .fusion import DepthFrame

MAGIC = b"RFN1"
HEADER_SIZE = 27
DISPARITY_SCALE = 256.0
_SEQ_MAX = (1 << 48) - 1
_HEADER_TAIL = struct.Struct("<QHHBI")  # timestamp, width, height, kind, length


class WireError(ValueError):
    pass


class PayloadKind(IntEnum):
    DISPARITY_RGB = 1
    FUSED_PNG = 2


@dataclass(frozen=True)
class FrameWireHeader:
    seq: int
    capture_timestamp_us: int
    width: int
    height: int
    payload_kind: PayloadKind
    payload_length: int

    def pack(self) -> bytes:
        if not 0 <= self.seq <= _SEQ_MAX:
            raise WireError(f"seq {self.seq} out of u48 range")
        return (
            MAGIC
            + int(self.seq).to_bytes(6, "little")
            + _HEADER_TAIL.pack(
                self.capture_timestamp_us,
                self.width,
                self.height,
                int(self.payload_kind),
                self.payload_length,
            )
        )

    @classmethod
    def unpack(cls, buf: bytes) -> "FrameWireHeader":
        if len(buf) < HEADER_SIZE:
            raise WireError(f"truncated header: {len(buf)} < {HEADER_SIZE} bytes")
        if buf[:4] != MAGIC:
            raise WireError(f"bad magic {buf[:4]!r}")
        seq = int.from_bytes(buf[4:10], "little")
        ts, width, height, kind, length = _HEADER_TAIL.unpack(buf[10:HEADER_SIZE])
        try:
            kind = PayloadKind(kind)
        except ValueError as e:
            raise WireError(f"unknown payload kind {kind}") from e
        return cls(seq, ts, width, height, kind, length)


def encode_packet(header: FrameWireHeader, payload: bytes) -> bytes:
    if header.payload_length != len(payload):
        raise WireError("header payload_length does not match payload")
    return header.pack() + payload


def decode_packet(buf: bytes) -> tuple[FrameWireHeader, bytes]:
    header = FrameWireHeader.unpack(buf)
    body = buf[HEADER_SIZE:]
    if len(body) != header.payload_length:
        raise WireError(
            f"payload length mismatch: header says {header.payload_length}, got {len(body)}"
        )
    return header, body


def quantize_disparity(disparity: np.ndarray) -> np.ndarray:
    """Round to wire precision (1/256); values that survive a round trip."""
    q = np.round(np.asarray(disparity, dtype=np.float64) * DISPARITY_SCALE)
    return (np.clip(q, 0, 0xFFFF) / DISPARITY_SCALE).astype(np.float32)


def encode_frame(frame: DepthFrame) -> bytes:
    """Serialize one depth frame; disparity is quantized to 1/256 units."""
    q = np.round(frame.disparity.astype(np.float64) * DISPARITY_SCALE)
    disp = np.clip(q, 0, 0xFFFF).astype("<u2")
    payload = disp.tobytes() + np.ascontiguousarray(frame.color).tobytes()
    header = FrameWireHeader(
        seq=frame.seq,
        capture_timestamp_us=frame.timestamp_us,
        width=frame.width,
        height=frame.height,
        payload_kind=PayloadKind.DISPARITY_RGB,
        payload_length=len(payload),
    )
    return encode_packet(header, payload)


def decode_frame(buf: bytes) -> DepthFrame:
    """Inverse of encode_frame. The capture pose does not travel on this
    stream (it rides the control channel); the result carries identity."""
    header, payload = decode_packet(buf)
    if header.payload_kind is not PayloadKind.DISPARITY_RGB:
        raise WireError(f"expected DISPARITY_RGB payload, got {header.payload_kind.name}")
    n = header.width * header.height
    expected = n * 5
    if header.payload_length != expected:
        raise WireError(f"payload length {header.payload_length} != {expected} for "
                        f"{header.width}x{header.height}")
    disp = np.frombuffer(payload, dtype="<u2", count=n).reshape(header.height, header.width)
    rgb = np.frombuffer(payload, dtype=np.uint8, offset=n * 2).reshape(header.height, header.width, 3)
    return DepthFrame(
        seq=header.seq,
        timestamp_us=header.capture_timestamp_us,
        width=header.width,
        height=header.height,
        disparity=(disp.astype(np.float64) / DISPARITY_SCALE).astype(np.float32),
        color=rgb.copy(),
    )


CONTROL_KINDS = ("TWIST", "ODOM", "GOAL", "MODE")


@dataclass(frozen=True)
class ControlMessage:
    kind: str
    body: dict = field(default_factory=dict)
    stamp_us: int = 0

    def __post_init__(self):
        if self.kind not in CONTROL_KINDS:
            raise WireError(f"unknown control kind {self.kind!r}")


def encode_control(msg: ControlMessage) -> str:
    """One newline-terminated JSON record."""
    return json.dumps(
        {"kind": msg.kind, "stamp_us": msg.stamp_us, "body": msg.body},
        separators=(",", ":"),
        sort_keys=True,
    ) + "\n"


def decode_control(line: str, lineno: int = 1) -> ControlMessage:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as e:
        raise WireError(f"malformed control record at line {lineno}: {e}") from e
    if not isinstance(doc, dict) or "kind" not in doc:
        raise WireError(f"malformed control record at line {lineno}: missing kind")
    kind = doc["kind"]
    if kind not in CONTROL_KINDS:
        raise WireError(f"unknown control kind {kind!r} at line {lineno}")
    return ControlMessage(kind=kind, body=doc.get("body", {}), stamp_us=int(doc.get("stamp_us", 0)))


def decode_control_stream(text: str) -> list[ControlMessage]:
    out = []
    for i, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            out.append(decode_control(line, lineno=i))
    return out
