"""Wire format and transport for recorded signal frames.

Frame layout, little-endian, no padding::

    offset  size  field
    0       4     magic  b"NKDF"
    4       1     version (1)
    5       1     encoding (0 = uniform wheel, 1 = M=2 sector)
    6       2     M
    8       8     delta_phi1, IEEE-754 binary64
    16      4     count
    20      2*n   position indices, uint16 each

A ``.nkdf`` file is a plain concatenation of frames.

The loopback link is ideal: frames arrive in order, unmodified, exactly
once. Every frame put on the link is also copied byte-for-byte to a
:class:`Tap`, which models an eavesdropper with full channel access.
"""

from __future__ import annotations

import collections
import os
import struct
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from .params import Encoding

MAGIC = b"NKDF"
VERSION = 1
HEADER = struct.Struct("<4sBBHdI")
HEADER_SIZE = HEADER.size  # 20


class FrameError(ValueError):
    """Base class for malformed frames."""


class BadMagicError(FrameError):
    pass


class UnsupportedVersionError(FrameError):
    pass


class BadEncodingError(FrameError):
    pass


class TruncatedFrameError(FrameError):
    def __init__(self, expected: int, actual: int):
        super().__init__(f"frame truncated: expected {expected} bytes, got {actual}")
        self.expected = expected
        self.actual = actual


class TrailingBytesError(FrameError):
    pass


class IndexRangeError(FrameError):
    pass


class ChannelError(RuntimeError):
    pass


def n_positions(encoding: Encoding, M: int) -> int:
    return 4 if encoding is Encoding.SECTOR_M2 else 2 * M


@dataclass
class SignalFrame:
    encoding: Encoding
    M: int
    delta_phi1: float
    positions: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint16))

    def __post_init__(self):
        self.encoding = Encoding(self.encoding)
        self.positions = np.asarray(self.positions, dtype=np.uint16)

    @property
    def count(self) -> int:
        return int(self.positions.size)

    def __eq__(self, other):
        if not isinstance(other, SignalFrame):
            return NotImplemented
        return (self.encoding == other.encoding and self.M == other.M
                and struct.pack("<d", self.delta_phi1) == struct.pack("<d", other.delta_phi1)
                and np.array_equal(self.positions, other.positions))

    @classmethod
    def from_params(cls, params, positions) -> "SignalFrame":
        return cls(params.encoding, params.M, float(params.delta_phi1), positions)


def serialize(frame: SignalFrame) -> bytes:
    limit = n_positions(frame.encoding, frame.M)
    pos = np.asarray(frame.positions)
    if pos.size and int(pos.max()) >= limit:
        raise IndexRangeError(f"position index {int(pos.max())} >= {limit}")
    if not 0 < frame.M <= 0xFFFF:
        raise FrameError(f"M={frame.M} does not fit the header")
    head = HEADER.pack(MAGIC, VERSION, int(frame.encoding), frame.M,
                       float(frame.delta_phi1), pos.size)
    return head + pos.astype("<u2").tobytes()


def _parse(buf: bytes, offset: int) -> tuple[SignalFrame, int]:
    if len(buf) - offset < HEADER_SIZE:
        raise TruncatedFrameError(HEADER_SIZE, len(buf) - offset)
    magic, version, enc, M, dphi, count = HEADER.unpack_from(buf, offset)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported frame version {version}")
    try:
        encoding = Encoding(enc)
    except ValueError:
        raise BadEncodingError(f"unknown encoding byte {enc}") from None
    end = offset + HEADER_SIZE + 2 * count
    if len(buf) < end:
        raise TruncatedFrameError(HEADER_SIZE + 2 * count, len(buf) - offset)
    pos = np.frombuffer(buf, dtype="<u2", count=count, offset=offset + HEADER_SIZE)
    limit = n_positions(encoding, M)
    if count and int(pos.max()) >= limit:
        raise IndexRangeError(f"position index {int(pos.max())} >= {limit}")
    return SignalFrame(encoding, M, dphi, pos.astype(np.uint16)), end


def deserialize(data: bytes) -> SignalFrame:
    frame, end = _parse(bytes(data), 0)
    if end != len(data):
        raise TrailingBytesError(f"{len(data) - end} bytes after frame end")
    return frame


def deserialize_stream(data: bytes) -> list[SignalFrame]:
    data = bytes(data)
    frames, offset = [], 0
    while offset < len(data):
        frame, offset = _parse(data, offset)
        frames.append(frame)
    return frames


def write_frames(path: Union[str, os.PathLike], frames: Iterable[SignalFrame]) -> None:
    with open(path, "wb") as fh:
        for f in frames:
            fh.write(serialize(f))


def read_frames(path: Union[str, os.PathLike]) -> list[SignalFrame]:
    with open(path, "rb") as fh:
        return deserialize_stream(fh.read())


class Tap:
    """Append-only record of every frame that crossed the link."""

    def __init__(self):
        self.copies: list[bytes] = []
        self.directions: list[str] = []

    def record(self, data: bytes, direction: str) -> None:
        self.copies.append(bytes(data))
        self.directions.append(direction)

    def __len__(self):
        return len(self.copies)

    def frames(self) -> list[SignalFrame]:
        return [deserialize(c) for c in self.copies]


class Endpoint:
    def __init__(self, name: str, tap: Tap):
        self.name = name
        self._tap = tap
        self._inbox: collections.deque[bytes] = collections.deque()
        self._peer: "Endpoint | None" = None
        self.closed = False

    def send(self, frame: SignalFrame) -> bytes:
        if self.closed or self._peer is None or self._peer.closed:
            raise ChannelError(f"{self.name}: send on closed channel")
        data = serialize(frame)
        self._tap.record(data, f"{self.name}->{self._peer.name}")
        self._peer._inbox.append(data)
        return data

    def recv(self) -> SignalFrame:
        if not self._inbox:
            raise ChannelError(f"{self.name}: no frame pending")
        return deserialize(self._inbox.popleft())

    def pending(self) -> int:
        return len(self._inbox)

    def close(self) -> None:
        self.closed = True


def loopback_pair(names=("A", "B")) -> tuple[Endpoint, Endpoint, Tap]:
    tap = Tap()
    a, b = Endpoint(names[0], tap), Endpoint(names[1], tap)
    a._peer, b._peer = b, a
    return a, b, tap
