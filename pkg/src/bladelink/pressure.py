"""Lossless multi-channel pressure codec.

Pipeline per block: inter-channel subtraction (applied per channel only when
it lowers the sum of absolute first differences), fixed-order temporal
prediction, zigzag mapping, and Rice coding with a per-channel parameter
estimated from the residual mean.  Channels whose Rice code would be larger
than their raw representation are stored raw.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .bitio import BitCursor
from .core import (
    PRESSURE_RATE_HZ,
    CodecId,
    CompressedPacket,
    SampleBlock,
    pack_prefix,
    parse_prefix,
    sample_limits,
)
from .errors import HeaderError, TruncatedPacketError, UnknownCodecError, UnsupportedMagnitudeError

MAX_RICE_PARAM = 30
ESCAPE_RUN = K.ESCAPE_RUN
ESCAPE_BITS = K.ESCAPE_BITS

FLAG_INTER = 0x01
FLAG_RAW = 0x02

_FIXED = struct.Struct("<HHBB")


@dataclass(frozen=True)
class RiceParams:
    M: int
    f: float = 0.5

    def __post_init__(self):
        if not 0 <= self.M <= MAX_RICE_PARAM:
            raise ValueError(f"Rice parameter {self.M} outside [0, {MAX_RICE_PARAM}]")
        if not 0.0 <= self.f <= 1.0:
            raise ValueError("f must lie in [0, 1]")


@dataclass(frozen=True)
class PressureConfig:
    predictor_order: int = 1
    f: float = 0.5

    def __post_init__(self):
        if self.predictor_order not in (0, 1, 2):
            raise ValueError("predictor order must be 0, 1 or 2")
        if not 0.0 <= self.f <= 1.0:
            raise ValueError("f must lie in [0, 1]")


@dataclass(frozen=True)
class PressureBlockHeader:
    channels: int
    samples_per_channel: int
    bit_depth: int
    predictor_order: int
    inter_channel: tuple[bool, ...]
    raw_fallback: tuple[bool, ...]
    rice_params: tuple[int, ...]

    def pack(self) -> bytes:
        out = bytearray(pack_prefix(CodecId.PRESSURE_LL))
        out += _FIXED.pack(self.channels, self.samples_per_channel, self.bit_depth, self.predictor_order)
        for inter, raw, m in zip(self.inter_channel, self.raw_fallback, self.rice_params):
            out.append((FLAG_INTER if inter else 0) | (FLAG_RAW if raw else 0))
            out.append(m)
        return bytes(out)

    @classmethod
    def unpack(cls, data: bytes) -> "PressureBlockHeader":
        if parse_prefix(data) != CodecId.PRESSURE_LL:
            raise UnknownCodecError("not a lossless pressure packet")
        if len(data) < 6 + _FIXED.size:
            raise TruncatedPacketError("pressure header truncated")
        channels, samples, depth, order = _FIXED.unpack_from(data, 6)
        if len(data) < header_length(data):
            raise TruncatedPacketError("pressure header truncated")
        if channels == 0 or samples == 0 or not 1 <= depth <= 32 or order not in (0, 1, 2):
            raise HeaderError("pressure header fields out of range")
        inter, raw, params = [], [], []
        for c in range(channels):
            flags, m = data[12 + 2 * c], data[13 + 2 * c]
            if flags & ~(FLAG_INTER | FLAG_RAW):
                raise HeaderError(f"channel {c}: unknown flag bits {flags:#x}")
            if flags == FLAG_INTER | FLAG_RAW:
                raise HeaderError(f"channel {c}: raw fallback combined with inter-channel flag")
            if c == 0 and flags & FLAG_INTER:
                raise HeaderError("reference channel cannot be inter-channel coded")
            if m > MAX_RICE_PARAM:
                raise HeaderError(f"channel {c}: Rice parameter {m} out of range")
            inter.append(bool(flags & FLAG_INTER))
            raw.append(bool(flags & FLAG_RAW))
            params.append(m)
        return cls(channels, samples, depth, order, tuple(inter), tuple(raw), tuple(params))


def header_length(data: bytes) -> int:
    channels = _FIXED.unpack_from(data, 6)[0]
    return 6 + _FIXED.size + 2 * channels


# -- primitives ---------------------------------------------------------------

def zigzag(v):
    """Map signed integers onto non-negative ones: 0, -1, 1, -2 -> 0, 1, 2, 3."""
    if isinstance(v, (int, np.integer)):
        v = int(v)
        return 2 * v if v >= 0 else -2 * v - 1
    v = np.asarray(v, dtype=np.int64)
    return (v << 1) ^ (v >> 63)


def unzigzag(u):
    if isinstance(u, (int, np.integer)):
        u = int(u)
        return u >> 1 if u % 2 == 0 else -((u + 1) >> 1)
    u = np.asarray(u, dtype=np.int64)
    return (u >> 1) ^ -(u & 1)


def estimate_rice_param(mean: float, f: float = 0.5) -> int:
    """Rice parameter from the mean of the mapped residuals, floor(log2(mean + f)) clamped at 0."""
    if mean < 0:
        raise ValueError("mean of mapped residuals cannot be negative")
    x = mean + f
    if x <= 0:
        return 0
    return min(MAX_RICE_PARAM, max(0, math.floor(math.log2(x))))


def rice_code_length(values, M: int) -> int:
    return int(K.rice_lengths(np.asarray(values, dtype=np.int64), M).sum())


def rice_encode(values, params: RiceParams, cursor: BitCursor) -> BitCursor:
    values = np.ascontiguousarray(values, dtype=np.int64)
    if values.size == 0:
        return cursor
    if values.min() < 0:
        raise ValueError("Rice coding requires non-negative values")
    m = params.M
    if (values >> m).max() >= ESCAPE_RUN and values.max() >> ESCAPE_BITS:
        raise UnsupportedMagnitudeError(f"value {values.max()} exceeds the {ESCAPE_BITS}-bit escape")
    bits = np.zeros(int(K.rice_lengths(values, m).sum()), dtype=np.uint8)
    K.rice_encode_into(values, m, bits, 0)
    return cursor.write_bit_array(bits)


def rice_decode(cursor: BitCursor, count: int, params: RiceParams) -> np.ndarray:
    out = np.empty(count, dtype=np.int64)
    if count == 0:
        return out
    bits = cursor.unpacked()
    pos = K.rice_decode_into(bits, cursor.bit_position, count, params.M, out)
    if pos < 0:
        raise TruncatedPacketError("Rice stream ended before all values were decoded")
    cursor.bit_position = int(pos)
    return out


def temporal_predict(x, order: int) -> np.ndarray:
    """Fixed-order prediction residuals along the last axis.

    The first ``order`` samples fall back to the highest lower-order
    predictor available, so the transform is exactly invertible.
    """
    x = np.asarray(x, dtype=np.int64)
    if order == 0:
        return x.copy()
    r = np.empty_like(x)
    r[..., :1] = x[..., :1]
    r[..., 1:] = np.diff(x, axis=-1)
    if order == 1:
        return r
    if order == 2:
        r[..., 2:] = np.diff(r[..., 1:], axis=-1)
        return r
    raise ValueError("predictor order must be 0, 1 or 2")


def temporal_reconstruct(r, order: int) -> np.ndarray:
    r = np.asarray(r, dtype=np.int64)
    if order == 0:
        return r.copy()
    if order == 1:
        return np.cumsum(r, axis=-1)
    if order == 2:
        d = np.empty_like(r)
        d[..., :1] = r[..., :1]
        d[..., 1:] = np.cumsum(r[..., 1:], axis=-1)
        return np.cumsum(d, axis=-1)
    raise ValueError("predictor order must be 0, 1 or 2")


def derivative_sum(x) -> np.ndarray:
    return np.abs(np.diff(np.asarray(x, dtype=np.int64), axis=-1)).sum(axis=-1)


def inter_channel_transform(block: SampleBlock | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Subtract the previous channel where that smooths the channel.

    Returns ``(residual, flags)``; ``flags[c]`` is True when channel ``c``
    was replaced by ``x[c] - x[c-1]``.  Channel 0 is never transformed.
    """
    x = block.data if isinstance(block, SampleBlock) else np.asarray(block, dtype=np.int64)
    residual = x.copy()
    flags = np.zeros(x.shape[0], dtype=bool)
    if x.shape[0] < 2:
        return residual, flags
    candidate = x[1:] - x[:-1]
    flags[1:] = derivative_sum(candidate) < derivative_sum(x[1:])
    residual[1:][flags[1:]] = candidate[flags[1:]]
    return residual, flags


# -- block codec --------------------------------------------------------------

def _channel_costs(mapped: np.ndarray, params: np.ndarray) -> np.ndarray:
    lengths = K.rice_lengths(mapped, params[:, None])
    cost = lengths.sum(axis=1).astype(np.float64)
    # escape payload is only 32 bits wide
    escaped = (mapped >> params[:, None]) >= ESCAPE_RUN
    too_big = (escaped & (mapped >> ESCAPE_BITS > 0)).any(axis=1)
    cost[too_big] = np.inf
    return cost


def encode_pressure_block(block: SampleBlock, config: PressureConfig | None = None) -> CompressedPacket:
    config = config or PressureConfig()
    if block.channels > 0xFFFF or block.samples_per_channel > 0xFFFF:
        raise ValueError("block too large for the 16-bit header fields")
    order = config.predictor_order
    depth = block.bit_depth
    n = block.samples_per_channel

    residual, inter = inter_channel_transform(block)
    mapped = zigzag(temporal_predict(residual, order))

    # mean over the steady-state residuals; warm-up samples carry the absolute level
    steady = mapped[:, order:] if n > order else mapped
    params = np.array([estimate_rice_param(float(mu), config.f) for mu in steady.mean(axis=1)], dtype=np.int64)
    cost = _channel_costs(mapped, params)
    raw = cost > n * depth
    inter &= ~raw
    params[raw] = 0

    total = int(np.where(raw, n * depth, np.where(np.isinf(cost), 0, cost)).sum())
    bits = np.zeros(total, dtype=np.uint8)
    pos = 0
    mask = (1 << depth) - 1
    for c in range(block.channels):
        if raw[c]:
            bits[pos:pos + n * depth] = K.pack_fixed(block.data[c] & mask, depth)
            pos += n * depth
        else:
            pos = K.rice_encode_into(mapped[c], int(params[c]), bits, pos)

    header = PressureBlockHeader(
        block.channels, n, depth, order,
        tuple(bool(v) for v in inter), tuple(bool(v) for v in raw), tuple(int(m) for m in params),
    )
    return CompressedPacket(
        CodecId.PRESSURE_LL, header.pack(), np.packbits(bits).tobytes(), block.raw_size, block.sample_rate
    )


def decode_pressure_block(packet: CompressedPacket, sample_rate: int | None = None) -> SampleBlock:
    if packet.codec_id != CodecId.PRESSURE_LL:
        raise UnknownCodecError(f"expected PRESSURE_LL packet, got {packet.codec_id.name}")
    hdr = PressureBlockHeader.unpack(packet.header)
    if len(packet.header) != header_length(packet.header):
        raise HeaderError("pressure header length does not match its channel count")
    n, depth, order = hdr.samples_per_channel, hdr.bit_depth, hdr.predictor_order

    bits = np.unpackbits(np.frombuffer(packet.payload, dtype=np.uint8))
    residual = np.zeros((hdr.channels, n), dtype=np.int64)
    raw_rows = {}
    pos = 0
    for c in range(hdr.channels):
        if hdr.raw_fallback[c]:
            if pos + n * depth > bits.size:
                raise TruncatedPacketError(f"channel {c}: raw payload truncated")
            u = K.unpack_fixed(bits[pos:pos + n * depth], depth)
            raw_rows[c] = u - ((u >> (depth - 1)) << depth)
            pos += n * depth
        else:
            pos = K.rice_decode_into(bits, pos, n, hdr.rice_params[c], residual[c])
            if pos < 0:
                raise TruncatedPacketError(f"channel {c}: Rice payload truncated")
    if len(packet.payload) != (pos + 7) // 8 or bits[pos:].any():
        raise HeaderError("payload length inconsistent with header")

    x = temporal_reconstruct(unzigzag(residual), order)
    for c, row in raw_rows.items():
        x[c] = row
    for c in range(1, hdr.channels):
        if hdr.inter_channel[c]:
            x[c] += x[c - 1]

    lo, hi = sample_limits(depth)
    if x.min() < lo or x.max() > hi:
        raise HeaderError("decoded samples exceed the declared bit depth")
    rate = sample_rate or packet.sample_rate or PRESSURE_RATE_HZ
    return SampleBlock(x, depth, rate, "pressure")
