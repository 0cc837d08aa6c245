"""Framed binary message format for the classical Alice-Bob exchange.

Frame layout (all integers little-endian):

    offset  size  field
    0       4     magic "PAQK"
    4       1     version (1)
    5       1     message type
    6       4     payload length (u32)
    10      n     payload
    10+n    4     CRC32 (IEEE) of header + payload

Payloads:

    HELLO          (1)  v_a f64, pulse_count u32, reveal_fraction f64
    PACKET_META    (2)  packet_id u32, pulse_count u32
    REVEAL_SET     (3)  packet_id u32, count u32, indices count*u32,
                        measurements 2*count*f64 interleaved (x_bh, p_bh)
    PARAM_ESTIMATE (4)  packet_id u32, theta, phi, delta, t_hat, xi_hat f64
    KEYRATE_REPORT (5)  packet_id u32, i_ab, chi_be, k f64

The encoding is byte-exact and deterministic; it is the wire contract.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from typing import Union

import numpy as np

MAGIC = b"PAQK"
VERSION = 1

MSG_HELLO = 1
MSG_PACKET_META = 2
MSG_REVEAL_SET = 3
MSG_PARAM_ESTIMATE = 4
MSG_KEYRATE_REPORT = 5

_HEADER = struct.Struct("<4sBBI")
_CRC = struct.Struct("<I")
_HELLO = struct.Struct("<dId")
_PACKET_META = struct.Struct("<II")
_REVEAL_HEAD = struct.Struct("<II")
_PARAM_ESTIMATE = struct.Struct("<Iddddd")
_KEYRATE_REPORT = struct.Struct("<Iddd")

MAX_PAYLOAD = 0xFFFFFFFF


class FrameError(ValueError):
    """Malformed frame: bad magic/version, bad CRC, truncation, or bad payload."""


@dataclass(frozen=True)
class Hello:
    v_a: float
    pulse_count: int
    reveal_fraction: float


@dataclass(frozen=True)
class PacketMeta:
    packet_id: int
    pulse_count: int


@dataclass(eq=False, frozen=True)
class RevealSet:
    packet_id: int
    indices: np.ndarray
    x_bh: np.ndarray
    p_bh: np.ndarray

    def __eq__(self, other):
        return (isinstance(other, RevealSet)
                and self.packet_id == other.packet_id
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.x_bh, other.x_bh)
                and np.array_equal(self.p_bh, other.p_bh))


@dataclass(frozen=True)
class ParamEstimate:
    packet_id: int
    theta: float
    phi: float
    delta: float
    t_hat: float
    xi_hat: float


@dataclass(frozen=True)
class KeyRateReport:
    packet_id: int
    i_ab: float
    chi_be: float
    k: float


MessageBody = Union[Hello, PacketMeta, RevealSet, ParamEstimate, KeyRateReport]


def _encode_body(body: MessageBody) -> tuple[int, bytes]:
    if isinstance(body, Hello):
        return MSG_HELLO, _HELLO.pack(body.v_a, body.pulse_count, body.reveal_fraction)
    if isinstance(body, PacketMeta):
        return MSG_PACKET_META, _PACKET_META.pack(body.packet_id, body.pulse_count)
    if isinstance(body, RevealSet):
        indices = np.ascontiguousarray(body.indices, dtype="<u4")
        if len(body.x_bh) != len(indices) or len(body.p_bh) != len(indices):
            raise ValueError("indices and measurements must have equal length")
        interleaved = np.column_stack([np.asarray(body.x_bh, dtype="<f8"),
                                       np.asarray(body.p_bh, dtype="<f8")]).ravel()
        return MSG_REVEAL_SET, (_REVEAL_HEAD.pack(body.packet_id, len(indices))
                                + indices.tobytes() + interleaved.tobytes())
    if isinstance(body, ParamEstimate):
        return MSG_PARAM_ESTIMATE, _PARAM_ESTIMATE.pack(
            body.packet_id, body.theta, body.phi, body.delta, body.t_hat, body.xi_hat)
    if isinstance(body, KeyRateReport):
        return MSG_KEYRATE_REPORT, _KEYRATE_REPORT.pack(
            body.packet_id, body.i_ab, body.chi_be, body.k)
    raise TypeError(f"not a message body: {body!r}")


def _decode_body(msg_type: int, payload: bytes) -> MessageBody:
    try:
        if msg_type == MSG_HELLO:
            return Hello(*_HELLO.unpack(payload))
        if msg_type == MSG_PACKET_META:
            return PacketMeta(*_PACKET_META.unpack(payload))
        if msg_type == MSG_REVEAL_SET:
            packet_id, count = _REVEAL_HEAD.unpack_from(payload)
            expected = _REVEAL_HEAD.size + 4 * count + 16 * count
            if len(payload) != expected:
                raise FrameError(f"reveal payload size mismatch: "
                                 f"{len(payload)} != {expected}")
            offset = _REVEAL_HEAD.size
            indices = np.frombuffer(payload, dtype="<u4", count=count,
                                    offset=offset).astype(np.int64)
            interleaved = np.frombuffer(payload, dtype="<f8", count=2 * count,
                                        offset=offset + 4 * count)
            return RevealSet(packet_id, indices,
                             interleaved[0::2].copy(), interleaved[1::2].copy())
        if msg_type == MSG_PARAM_ESTIMATE:
            return ParamEstimate(*_PARAM_ESTIMATE.unpack(payload))
        if msg_type == MSG_KEYRATE_REPORT:
            return KeyRateReport(*_KEYRATE_REPORT.unpack(payload))
    except struct.error as exc:
        raise FrameError(f"bad payload for message type {msg_type}: {exc}") from exc
    raise FrameError(f"unknown message type {msg_type}")


def encode_frame(body: MessageBody) -> bytes:
    """Serialize a message body into one byte-exact frame."""
    msg_type, payload = _encode_body(body)
    if len(payload) > MAX_PAYLOAD:
        raise ValueError("payload exceeds the u32 length field")
    header = _HEADER.pack(MAGIC, VERSION, msg_type, len(payload))
    crc = zlib.crc32(header + payload) & 0xFFFFFFFF
    return header + payload + _CRC.pack(crc)


def decode_frame(data: bytes) -> MessageBody:
    """Parse exactly one complete frame; the inverse of ``encode_frame``."""
    if len(data) < _HEADER.size + _CRC.size:
        raise FrameError("truncated frame")
    magic, version, msg_type, payload_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FrameError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FrameError(f"bad version {version}")
    total = _HEADER.size + payload_len + _CRC.size
    if len(data) < total:
        raise FrameError("truncated frame")
    if len(data) > total:
        raise FrameError("frame length mismatch (trailing bytes)")
    payload = data[_HEADER.size:_HEADER.size + payload_len]
    (crc_stored,) = _CRC.unpack_from(data, _HEADER.size + payload_len)
    crc = zlib.crc32(data[:_HEADER.size + payload_len]) & 0xFFFFFFFF
    if crc != crc_stored:
        raise FrameError(f"crc mismatch: computed {crc:#010x}, stored {crc_stored:#010x}")
    return _decode_body(msg_type, payload)
