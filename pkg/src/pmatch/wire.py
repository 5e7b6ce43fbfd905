"""Wire framing shared by all three protocols.

Frame layout: 4-byte big-endian payload length, 1-byte protocol id,
1-byte step tag, payload.  Payload group elements use the cipher module's
minimal big-endian encoding with a 2-byte length prefix; sequences carry a
4-byte big-endian count; similarity values travel as IEEE-754 doubles.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .cipher import decode_element, encode_element

FRAME_HEADER_BYTES = 6  # 4-byte length + protocol id + step tag

PROTO_PMATCH = 1
PROTO_PMATCH_PLUS = 2
PROTO_EMATCH = 3

# Step tags.  The basic and enhanced protocols share steps 1-5; tag 0 is an
# explicit decline usable at any gate.
TAG_DECLINE = 0
TAG_ANNOUNCE = 1          # initiator: (encrypted attribute, encrypted priority) pairs
TAG_RESPONDER_SET = 2     # responder: encrypted attributes
TAG_REENCRYPTED_SET = 3   # initiator: responder's attributes, re-encrypted (responder order)
TAG_PRIORITIES_WRAPPED = 4  # responder: double-encrypted priorities (announce order)
TAG_PRIORITIES_SWAPPED = 5  # initiator: priorities under responder key only (announce order)
TAG_SIMILARITY = 6        # responder: similarity value
TAG_ATTRS_CONFIRMED = 7   # enhanced responder: initiator attrs under both keys (announce order)

TAG_EM_REQ = 1
TAG_EM_ACK = 2
TAG_EM_DATA = 3
TAG_EM_RESULT = 4


class FramingError(Exception):
    """Malformed or truncated frame."""


@dataclass(frozen=True)
class Frame:
    protocol: int
    step: int
    payload: bytes

    def encode(self) -> bytes:
        return (
            len(self.payload).to_bytes(4, "big")
            + bytes([self.protocol, self.step])
            + self.payload
        )

    def __len__(self) -> int:
        return FRAME_HEADER_BYTES + len(self.payload)


def decode_frame(data: bytes, offset: int = 0) -> tuple[Frame, int]:
    """Decode one frame from a byte stream; returns (frame, next_offset)."""
    if offset + FRAME_HEADER_BYTES > len(data):
        raise FramingError("truncated frame header")
    size = int.from_bytes(data[offset : offset + 4], "big")
    protocol = data[offset + 4]
    step = data[offset + 5]
    end = offset + FRAME_HEADER_BYTES + size
    if end > len(data):
        raise FramingError("truncated frame payload")
    return Frame(protocol=protocol, step=step, payload=bytes(data[offset + 6 : end])), end


def pack_elements(elements: list[int]) -> bytes:
    out = bytearray(len(elements).to_bytes(4, "big"))
    for x in elements:
        out += encode_element(x)
    return bytes(out)


def unpack_elements(payload: bytes) -> list[int]:
    if len(payload) < 4:
        raise FramingError("missing element count")
    n = int.from_bytes(payload[0:4], "big")
    out = []
    off = 4
    try:
        for _ in range(n):
            x, off = decode_element(payload, off)
            out.append(x)
    except ValueError as exc:
        raise FramingError(str(exc)) from exc
    if off != len(payload):
        raise FramingError("trailing bytes after elements")
    return out


def pack_pairs(pairs: list[tuple[int, int]]) -> bytes:
    out = bytearray(len(pairs).to_bytes(4, "big"))
    for a, b in pairs:
        out += encode_element(a)
        out += encode_element(b)
    return bytes(out)


def unpack_pairs(payload: bytes) -> list[tuple[int, int]]:
    if len(payload) < 4:
        raise FramingError("missing pair count")
    n = int.from_bytes(payload[0:4], "big")
    out = []
    off = 4
    try:
        for _ in range(n):
            a, off = decode_element(payload, off)
            b, off = decode_element(payload, off)
            out.append((a, b))
    except ValueError as exc:
        raise FramingError(str(exc)) from exc
    if off != len(payload):
        raise FramingError("trailing bytes after pairs")
    return out


def pack_similarity(value: float) -> bytes:
    return struct.pack(">d", value)


def unpack_similarity(payload: bytes) -> float:
    if len(payload) != 8:
        raise FramingError("similarity payload must be 8 bytes")
    return struct.unpack(">d", payload)[0]
