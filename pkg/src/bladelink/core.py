"""Shared data model: sample blocks, compressed packets, sensor inventory."""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import HeaderError, TruncatedPacketError, UnknownCodecError

PACKET_MAGIC = b"ASC1"
PACKET_VERSION = 1
MAX_BIT_DEPTH = 32
MIN_BLOCK = 64

PRESSURE_BLOCK = 512
AUDIO_BLOCK = 1024
PRESSURE_RATE_HZ = 100
AUDIO_RATE_HZ = 16_000


class CodecId(enum.IntEnum):
    RAW = 0
    PRESSURE_LL = 1
    FFT_HPF = 2
    ADPCM = 3


def sample_bytes(bit_depth: int) -> int:
    return (bit_depth + 7) // 8


def sample_limits(bit_depth: int) -> tuple[int, int]:
    """Inclusive two's complement range of a ``bit_depth``-bit sample."""
    half = 1 << (bit_depth - 1)
    return -half, half - 1


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True, eq=False)
class SampleBlock:
    """Channel-major matrix of signed integer samples.

    ``data`` has shape ``(channels, samples_per_channel)``; the number of
    samples per channel must be a power of two no smaller than 64.
    """

    data: np.ndarray
    bit_depth: int
    sample_rate: int
    kind: str = "pressure"

    def __post_init__(self):
        data = np.array(self.data, dtype=np.int64, copy=True)
        if data.ndim == 1:
            data = data[np.newaxis, :]
        if data.ndim != 2 or data.shape[0] < 1:
            raise ValueError("block data must be a non-empty (channels, samples) matrix")
        if not 1 <= self.bit_depth <= MAX_BIT_DEPTH:
            raise ValueError(f"bit depth {self.bit_depth} outside [1, {MAX_BIT_DEPTH}]")
        n = data.shape[1]
        if n < MIN_BLOCK or not _is_pow2(n):
            raise ValueError(f"samples per channel must be a power of two >= {MIN_BLOCK}, got {n}")
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        lo, hi = sample_limits(self.bit_depth)
        if data.size and (data.min() < lo or data.max() > hi):
            raise ValueError(f"samples exceed {self.bit_depth}-bit signed range")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def samples_per_channel(self) -> int:
        return self.data.shape[1]

    @property
    def raw_size(self) -> int:
        """Size in bytes of the RAW serialization."""
        return self.data.size * sample_bytes(self.bit_depth)

    def __eq__(self, other):
        if not isinstance(other, SampleBlock):
            return NotImplemented
        return (
            self.bit_depth == other.bit_depth
            and self.sample_rate == other.sample_rate
            and self.kind == other.kind
            and np.array_equal(self.data, other.data)
        )

    def __hash__(self):
        return hash((self.bit_depth, self.sample_rate, self.kind, self.data.tobytes()))


@dataclass(frozen=True)
class CompressedPacket:
    """Self-describing codec output: header bytes followed by payload bytes."""

    codec_id: CodecId
    header: bytes
    payload: bytes
    original_size: int
    sample_rate: int | None = field(default=None, compare=False)

    @property
    def size(self) -> int:
        return len(self.header) + len(self.payload)

    @property
    def compression_ratio(self) -> float:
        return self.original_size / self.size

    def to_bytes(self) -> bytes:
        return self.header + self.payload


def pack_prefix(codec: CodecId) -> bytes:
    return PACKET_MAGIC + struct.pack("<BB", PACKET_VERSION, int(codec))


def parse_prefix(data: bytes) -> CodecId:
    if len(data) < 6:
        raise TruncatedPacketError("packet shorter than its 6-byte prefix")
    if data[:4] != PACKET_MAGIC:
        raise HeaderError(f"bad packet magic {data[:4]!r}")
    version, codec = data[4], data[5]
    if version != PACKET_VERSION:
        raise HeaderError(f"unsupported packet version {version}")
    try:
        return CodecId(codec)
    except ValueError:
        raise UnknownCodecError(f"unknown codec id {codec}") from None


# -- RAW codec --------------------------------------------------------------

_RAW_HEADER = struct.Struct("<HHBB")


def serialize_block(block: SampleBlock) -> bytes:
    """Channel-major, little-endian, each sample sign-extended to whole bytes."""
    width = sample_bytes(block.bit_depth)
    flat = block.data.reshape(-1).astype("<i8")
    return flat.view(np.uint8).reshape(-1, 8)[:, :width].tobytes()


def deserialize_block(
    raw: bytes, channels: int, samples: int, bit_depth: int, sample_rate: int, kind: str = "pressure"
) -> SampleBlock:
    width = sample_bytes(bit_depth)
    expected = channels * samples * width
    if len(raw) != expected:
        raise TruncatedPacketError(f"raw block holds {len(raw)} bytes, expected {expected}")
    cells = np.frombuffer(raw, dtype=np.uint8).reshape(-1, width)
    # sign-extend from the top byte of each sample
    fill = np.where(cells[:, -1] & 0x80, 0xFF, 0).astype(np.uint8)
    wide = np.empty((cells.shape[0], 8), dtype=np.uint8)
    wide[:, :width] = cells
    wide[:, width:] = fill[:, None]
    values = wide.view("<i8").reshape(channels, samples)
    return SampleBlock(values, bit_depth, sample_rate, kind)


def encode_raw(block: SampleBlock) -> CompressedPacket:
    if block.samples_per_channel > 0xFFFF or block.channels > 0xFFFF:
        raise ValueError("block too large for the 16-bit header fields")
    header = pack_prefix(CodecId.RAW) + _RAW_HEADER.pack(
        block.channels, block.samples_per_channel, block.bit_depth, 0
    )
    return CompressedPacket(CodecId.RAW, header, serialize_block(block), block.raw_size, block.sample_rate)


def raw_header_length(data: bytes) -> int:
    return 6 + _RAW_HEADER.size


def decode_raw(packet: CompressedPacket, sample_rate: int | None = None, kind: str = "pressure") -> SampleBlock:
    if packet.codec_id != CodecId.RAW:
        raise UnknownCodecError(f"expected RAW packet, got {packet.codec_id.name}")
    if len(packet.header) != 6 + _RAW_HEADER.size:
        raise HeaderError("RAW header has the wrong length")
    channels, samples, depth, _ = _RAW_HEADER.unpack(packet.header[6:])
    if not 1 <= depth <= MAX_BIT_DEPTH or channels == 0:
        raise HeaderError("RAW header fields out of range")
    rate = sample_rate or packet.sample_rate or PRESSURE_RATE_HZ
    return deserialize_block(packet.payload, channels, samples, depth, rate, kind)


# -- sensor inventory -------------------------------------------------------

@dataclass(frozen=True)
class SensorEntry:
    kind: str
    count: int
    sample_rate: float
    bit_depth: int

    def __post_init__(self):
        if self.count <= 0 or self.sample_rate <= 0 or self.bit_depth <= 0:
            raise ValueError(f"sensor entry {self.kind!r}: count, rate and depth must be positive")

    @property
    def bandwidth(self) -> float:
        return self.count * self.sample_rate * self.bit_depth


@dataclass(frozen=True)
class SensorSuite:
    entries: tuple[SensorEntry, ...] = ()

    def __iter__(self):
        return iter(self.entries)


_ACCUMULATOR_LIMIT = 2.0**63


def compute_raw_bandwidth(suite: SensorSuite) -> float:
    """Aggregate raw sensor data rate in bits per second."""
    total = 0.0
    for entry in suite:
        total += entry.bandwidth
        if not math.isfinite(total) or total >= _ACCUMULATOR_LIMIT:
            raise OverflowError("raw bandwidth accumulator overflow: invalid sensor configuration")
    return total


def default_suite() -> SensorSuite:
    """The node's full sensor inventory.

    The IMU is modelled from its per-axis sampling rates (accelerometer and
    gyroscope at 100 Hz, magnetometer at 12.5 Hz, 16-bit samples).
    """
    return SensorSuite((
        SensorEntry("microphone", 10, AUDIO_RATE_HZ, 24),
        SensorEntry("barometer", 40, PRESSURE_RATE_HZ, 24),
        SensorEntry("differential", 5, 1200, 16),
        SensorEntry("imu-accel-gyro", 6, 100, 16),
        SensorEntry("imu-magnetometer", 3, 12.5, 16),
    ))
