"""IMA ADPCM baseline codec (4-bit codes, standard step and index tables)."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import AUDIO_RATE_HZ, CodecId, CompressedPacket, SampleBlock, pack_prefix, parse_prefix, sample_limits
from .errors import HeaderError, TruncatedPacketError, UnknownCodecError

STEP_TABLE = (
    7, 8, 9, 10, 11, 12, 13, 14, 16, 17,
    19, 21, 23, 25, 28, 31, 34, 37, 41, 45,
    50, 55, 60, 66, 73, 80, 88, 97, 107, 118,
    130, 143, 157, 173, 190, 209, 230, 253, 279, 307,
    337, 371, 408, 449, 494, 544, 598, 658, 724, 796,
    876, 963, 1060, 1166, 1282, 1411, 1552, 1707, 1878, 2066,
    2272, 2499, 2749, 3024, 3327, 3660, 4026, 4428, 4871, 5358,
    5894, 6484, 7132, 7845, 8630, 9493, 10442, 11487, 12635, 13899,
    15289, 16818, 18500, 20350, 22385, 24623, 27086, 29794, 32767,
)
INDEX_TABLE = (-1, -1, -1, -1, 2, 4, 6, 8, -1, -1, -1, -1, 2, 4, 6, 8)

_FIXED = struct.Struct("<HHBB")
_STATE = struct.Struct("<hB")


@dataclass(frozen=True)
class AdpcmState:
    predicted_sample: int = 0
    step_index: int = 0

    def __post_init__(self):
        if not 0 <= self.step_index < len(STEP_TABLE):
            raise ValueError(f"step index {self.step_index} outside the step table")
        if not -32768 <= self.predicted_sample <= 32767:
            raise ValueError("predicted sample outside the 16-bit range")


def _clamp16(v: int) -> int:
    return -32768 if v < -32768 else 32767 if v > 32767 else v


def ima_encode(samples, state: AdpcmState | None = None) -> tuple[list[int], AdpcmState]:
    """Encode 16-bit samples to 4-bit codes; returns the codes and final state."""
    state = state or AdpcmState()
    valpred, index = state.predicted_sample, state.step_index
    step = STEP_TABLE[index]
    codes = []
    for val in samples:
        diff = int(val) - valpred
        sign = 8 if diff < 0 else 0
        if sign:
            diff = -diff
        delta = 0
        vpdiff = step >> 3
        if diff >= step:
            delta = 4
            diff -= step
            vpdiff += step
        half = step >> 1
        if diff >= half:
            delta |= 2
            diff -= half
            vpdiff += half
        quarter = step >> 2
        if diff >= quarter:
            delta |= 1
            vpdiff += quarter
        valpred = _clamp16(valpred - vpdiff if sign else valpred + vpdiff)
        delta |= sign
        index = min(88, max(0, index + INDEX_TABLE[delta]))
        step = STEP_TABLE[index]
        codes.append(delta)
    return codes, AdpcmState(valpred, index)


def ima_decode(codes, state: AdpcmState | None = None) -> tuple[list[int], AdpcmState]:
    state = state or AdpcmState()
    valpred, index = state.predicted_sample, state.step_index
    step = STEP_TABLE[index]
    out = []
    for delta in codes:
        vpdiff = step >> 3
        if delta & 4:
            vpdiff += step
        if delta & 2:
            vpdiff += step >> 1
        if delta & 1:
            vpdiff += step >> 2
        valpred = _clamp16(valpred - vpdiff if delta & 8 else valpred + vpdiff)
        index = min(88, max(0, index + INDEX_TABLE[delta]))
        step = STEP_TABLE[index]
        out.append(valpred)
    return out, AdpcmState(valpred, index)


def initial_state(samples) -> AdpcmState:
    """Start predicting from the first sample with a step matched to the first difference."""
    if len(samples) == 0:
        return AdpcmState()
    first = int(samples[0])
    jump = abs(int(samples[1]) - first) if len(samples) > 1 else 0
    index = next((i for i, s in enumerate(STEP_TABLE) if s >= jump), len(STEP_TABLE) - 1)
    return AdpcmState(first, index)


def pack_nibbles(codes) -> bytes:
    """Two codes per byte, first code in the high nibble."""
    c = np.asarray(codes, dtype=np.uint8)
    if c.size % 2:
        c = np.append(c, 0)
    return ((c[0::2] << 4) | c[1::2]).astype(np.uint8).tobytes()


def unpack_nibbles(data: bytes, count: int) -> list[int]:
    b = np.frombuffer(data, dtype=np.uint8)
    c = np.empty(2 * b.size, dtype=np.uint8)
    c[0::2] = b >> 4
    c[1::2] = b & 0x0F
    return c[:count].tolist()


def default_shift(bit_depth: int) -> int:
    return max(0, bit_depth - 16)


def adpcm_encode(block: SampleBlock, shift: int | None = None) -> CompressedPacket:
    """Encode every channel after an arithmetic right shift into the 16-bit domain.

    ``original_size`` counts the 16-bit input domain (2 bytes per sample),
    so the payload ratio is exactly 4.
    """
    shift = default_shift(block.bit_depth) if shift is None else shift
    if shift < 0 or block.bit_depth - shift > 16:
        raise ValueError(f"shift {shift} does not bring {block.bit_depth}-bit samples into 16 bits")
    n = block.samples_per_channel
    header = bytearray(pack_prefix(CodecId.ADPCM))
    header += _FIXED.pack(block.channels, n, block.bit_depth, shift)
    payload = bytearray()
    for channel in block.data:
        x16 = (channel >> shift).tolist()
        state = initial_state(x16)
        codes, _ = ima_encode(x16, state)
        header += _STATE.pack(state.predicted_sample, state.step_index)
        payload += pack_nibbles(codes)
    return CompressedPacket(
        CodecId.ADPCM, bytes(header), bytes(payload), block.channels * n * 2, block.sample_rate
    )


def payload_ratio(packet: CompressedPacket) -> float:
    return packet.original_size / len(packet.payload)


def adpcm_decode(packet: CompressedPacket, sample_rate: int | None = None) -> SampleBlock:
    if packet.codec_id != CodecId.ADPCM:
        raise UnknownCodecError(f"expected ADPCM packet, got {packet.codec_id.name}")
    h = packet.header
    if parse_prefix(h) != CodecId.ADPCM or len(h) < 6 + _FIXED.size:
        raise TruncatedPacketError("ADPCM header truncated")
    channels, n, depth, shift = _FIXED.unpack_from(h, 6)
    if channels == 0 or not 1 <= depth <= 32 or depth - shift > 16:
        raise HeaderError("ADPCM header fields out of range")
    if len(h) != header_length(h):
        raise HeaderError("ADPCM header length does not match its channel count")
    per_channel = (n + 1) // 2
    if len(packet.payload) != channels * per_channel:
        raise TruncatedPacketError("ADPCM payload length does not match the header")
    lo, hi = sample_limits(depth)
    data = np.empty((channels, n), dtype=np.int64)
    for c in range(channels):
        pred, index = _STATE.unpack_from(h, 12 + _STATE.size * c)
        if index >= len(STEP_TABLE):
            raise HeaderError(f"channel {c}: step index {index} out of range")
        codes = unpack_nibbles(packet.payload[c * per_channel:(c + 1) * per_channel], n)
        samples, _ = ima_decode(codes, AdpcmState(pred, index))
        data[c] = np.clip(np.asarray(samples, dtype=np.int64) << shift, lo, hi)
    rate = sample_rate or packet.sample_rate or AUDIO_RATE_HZ
    return SampleBlock(data, depth, rate, "audio")


def header_length(data: bytes) -> int:
    channels = _FIXED.unpack_from(data, 6)[0]
    return 6 + _FIXED.size + _STATE.size * channels
