"""Codec dispatch: encode a block by codec name, parse and decode packet bytes."""

from __future__ import annotations

from . import adpcm, audio, pressure
from .core import (
    CodecId,
    CompressedPacket,
    SampleBlock,
    decode_raw,
    encode_raw,
    parse_prefix,
    raw_header_length,
)
from .errors import TruncatedPacketError

CODEC_NAMES = {
    "raw": CodecId.RAW,
    "pressure-ll": CodecId.PRESSURE_LL,
    "fft-hpf": CodecId.FFT_HPF,
    "adpcm": CodecId.ADPCM,
}

_HEADER_LENGTH = {
    CodecId.RAW: raw_header_length,
    CodecId.PRESSURE_LL: pressure.header_length,
    CodecId.FFT_HPF: lambda data: audio.HEADER_SIZE,
    CodecId.ADPCM: adpcm.header_length,
}

# smallest prefix from which each codec's header length can be computed
_MIN_HEADER = {CodecId.RAW: 12, CodecId.PRESSURE_LL: 12, CodecId.FFT_HPF: 20, CodecId.ADPCM: 12}


def codec_by_name(name: str) -> CodecId:
    try:
        return CODEC_NAMES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown codec {name!r}; choose from {', '.join(CODEC_NAMES)}") from None


def _original_size(codec: CodecId, header: bytes) -> int:
    if codec == CodecId.ADPCM:
        channels, n = header[6] | header[7] << 8, header[8] | header[9] << 8
        return channels * n * 2
    if codec == CodecId.FFT_HPF:
        h = audio.FftHpfHeader.unpack(header)
        return h.channels * h.n_fft * ((h.bit_depth + 7) // 8)
    channels, n, depth = header[6] | header[7] << 8, header[8] | header[9] << 8, header[10]
    return channels * n * ((depth + 7) // 8)


def parse_packet(data: bytes, sample_rate: int | None = None) -> CompressedPacket:
    """Split serialized packet bytes into header and payload."""
    codec = parse_prefix(data)
    if len(data) < _MIN_HEADER[codec]:
        raise TruncatedPacketError(f"{codec.name} header truncated")
    n = _HEADER_LENGTH[codec](data)
    if len(data) < n:
        raise TruncatedPacketError(f"{codec.name} header truncated")
    header = bytes(data[:n])
    return CompressedPacket(codec, header, bytes(data[n:]), _original_size(codec, header), sample_rate)


def encode_block(block: SampleBlock, codec: CodecId | str, **options) -> CompressedPacket:
    if isinstance(codec, str):
        codec = codec_by_name(codec)
    if codec == CodecId.RAW:
        return encode_raw(block)
    if codec == CodecId.PRESSURE_LL:
        return pressure.encode_pressure_block(block, pressure.PressureConfig(**options))
    if codec == CodecId.FFT_HPF:
        return audio.encode_audio_fft_hpf(block, **options)
    return adpcm.adpcm_encode(block, **options)


def decode_packet(packet: CompressedPacket, sample_rate: int | None = None, kind: str | None = None) -> SampleBlock:
    codec = packet.codec_id
    if codec == CodecId.RAW:
        return decode_raw(packet, sample_rate, kind or "pressure")
    if codec == CodecId.PRESSURE_LL:
        block = pressure.decode_pressure_block(packet, sample_rate)
    elif codec == CodecId.FFT_HPF:
        block = audio.decode_audio_fft_hpf(packet)
    else:
        block = adpcm.adpcm_decode(packet, sample_rate)
    if kind and kind != block.kind:
        block = SampleBlock(block.data, block.bit_depth, block.sample_rate, kind)
    return block
