"""In-process transports standing in for the radio link.

Both transports deliver frames reliably and in order while recording raw
byte counts.  The loopback variant serializes every frame into a byte
stream and re-parses it on receipt, exercising the framing layer; the
in-process variant hands the encoded bytes straight across.  Transfer time
is never slept: it is simulated from the byte count and a configured link
rate.
"""

from __future__ import annotations

from collections import deque

from .wire import Frame, FramingError, decode_frame

DEFAULT_LINK_RATE_BPS = 900_000  # bits per second


class Endpoint:
    """One side of a transport: send frames, poll received ones."""

    def __init__(self):
        self.peer: "Endpoint | None" = None
        self.bytes_sent = 0
        self.bytes_received = 0
        self._inbox: deque[Frame] = deque()

    def send(self, frame: Frame) -> None:
        raise NotImplementedError

    def receive(self) -> Frame | None:
        if not self._inbox:
            return None
        return self._inbox.popleft()

    def pending(self) -> bool:
        return bool(self._inbox)


class InProcessEndpoint(Endpoint):
    def send(self, frame: Frame) -> None:
        data = frame.encode()
        self.bytes_sent += len(data)
        self.peer.bytes_received += len(data)
        self.peer._inbox.append(frame)


class LoopbackEndpoint(Endpoint):
    """Frames cross as a byte stream and are re-framed on the way in."""

    def __init__(self):
        super().__init__()
        self._stream = bytearray()

    def send(self, frame: Frame) -> None:
        data = frame.encode()
        self.bytes_sent += len(data)
        self.peer.bytes_received += len(data)
        self.peer._stream += data
        self.peer._drain()

    def _drain(self) -> None:
        offset = 0
        while offset < len(self._stream):
            try:
                frame, offset = decode_frame(self._stream, offset)
            except FramingError:
                break  # wait for more bytes; a short final frame surfaces on inject
            self._inbox.append(frame)
        del self._stream[:offset]

    def inject(self, raw: bytes) -> None:
        """Feed raw bytes directly into the stream (for framing tests)."""
        self._stream += raw
        self._drain()

    def close(self) -> None:
        """End of stream; leftover bytes mean a frame was truncated."""
        if self._stream:
            raise FramingError(f"{len(self._stream)} undecodable trailing bytes at stream end")


def make_pair(kind: str = "inprocess") -> tuple[Endpoint, Endpoint]:
    cls = {"inprocess": InProcessEndpoint, "loopback": LoopbackEndpoint}[kind]
    a, b = cls(), cls()
    a.peer, b.peer = b, a
    return a, b


def transfer_seconds(n_bytes: int, rate_bps: int = DEFAULT_LINK_RATE_BPS) -> float:
    """Simulated time to move n_bytes over the configured link."""
    if rate_bps <= 0:
        raise ValueError("link rate must be positive")
    return 8 * n_bytes / rate_bps
