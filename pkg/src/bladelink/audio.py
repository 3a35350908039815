"""Lossy FFT high-pass audio codec (FFT-HPF).

Each channel of a block is transformed with a real FFT, bins below the
cutoff are dropped, and the retained coefficients (real and imaginary parts
interleaved) are split into bands.  Every band gets its own quantization
step, derived from its peak magnitude and the number of levels implied by
the target compression ratio.  Steps live on a quarter-octave grid and are
sent as delta/run-length coded 8-bit exponent codes.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .bitio import BitCursor
from .core import (
    AUDIO_RATE_HZ,
    CodecId,
    CompressedPacket,
    SampleBlock,
    pack_prefix,
    parse_prefix,
    sample_limits,
)
from .errors import HeaderError, TruncatedPacketError, UnknownCodecError, UnsupportedMagnitudeError
from .pressure import RiceParams, rice_decode, rice_encode, unzigzag, zigzag

SENTINEL_CODE = -128
MIN_CODE, MAX_CODE = -127, 127
DEFAULT_BAND_SIZE = 32
DEFAULT_CUTOFF_HZ = 100.0
TABLE_RICE = RiceParams(2)
MIN_RUN = 3

_FIXED = struct.Struct("<HHBBHHI")
HEADER_SIZE = 6 + _FIXED.size


@dataclass(frozen=True, eq=False)
class SpectralBlock:
    """Half spectrum (bins 0..n_fft/2) of one real channel, unnormalized forward FFT."""

    n_fft: int
    sample_rate: float
    coefficients: np.ndarray

    @property
    def bin_hz(self) -> float:
        return self.sample_rate / self.n_fft

    def energy(self) -> float:
        """Time-domain energy implied by the spectrum (Parseval)."""
        p = np.abs(self.coefficients) ** 2
        return float((p[0] + p[-1] + 2 * p[1:-1].sum()) / self.n_fft)


def _check_pow2(n: int) -> None:
    if n < 2 or n & (n - 1):
        raise ValueError(f"transform length {n} is not a power of two")


def forward_spectrum(channel, rate: float) -> SpectralBlock:
    x = np.asarray(channel, dtype=np.float64)
    _check_pow2(x.size)
    return SpectralBlock(x.size, rate, np.fft.rfft(x))


def inverse_spectrum(spec: SpectralBlock) -> np.ndarray:
    return np.fft.irfft(spec.coefficients, n=spec.n_fft)


def cutoff_bin(n_fft: int, rate: float, cutoff: float) -> int:
    if not 0 <= cutoff < rate / 2:
        raise ValueError("cutoff must lie in [0, rate/2)")
    return min(n_fft // 2, math.ceil(cutoff * n_fft / rate))


def high_pass_select(spec: SpectralBlock, cutoff: float) -> tuple[int, int]:
    """Inclusive retained bin range ``(k0, n_fft/2)``."""
    return cutoff_bin(spec.n_fft, spec.sample_rate, cutoff), spec.n_fft // 2


# -- band quantizer -----------------------------------------------------------

def raw_step(mag: float, d: int) -> float:
    return 2.0 * mag / (1 << d)


def step_from_code(code: int) -> float:
    return 2.0 ** (code / 4.0)


def snap_step_code(step: float) -> int:
    """Smallest quarter-octave code whose step is >= ``step``."""
    code = math.ceil(4.0 * math.log2(step))
    while step_from_code(code) < step:
        code += 1
    while code - 1 >= MIN_CODE and step_from_code(code - 1) >= step:
        code -= 1
    return max(code, MIN_CODE)


def band_quantize(values, d: int) -> tuple[np.ndarray, int]:
    """Quantize one band to ``d``-bit mid-tread indices.

    Returns ``(indices, step_code)``.  An all-zero band yields the sentinel
    code and zero indices.  When the snapped step would clip the largest
    positive value, the code is raised until it does not, so every value is
    reconstructed within half a step.
    """
    if d < 1:
        raise ValueError("need at least one bit per value")
    values = np.asarray(values, dtype=np.float64)
    mag = float(np.abs(values).max()) if values.size else 0.0
    if mag == 0.0:
        return np.zeros(values.size, dtype=np.int64), SENTINEL_CODE
    half = 1 << (d - 1)
    code = snap_step_code(raw_step(mag, d))
    top = float(values.max())
    while np.rint(top / step_from_code(code)) > half - 1:
        code += 1
    if code > MAX_CODE:
        raise UnsupportedMagnitudeError(f"band peak {mag:g} needs a step beyond the code range")
    idx = np.rint(values / step_from_code(code)).astype(np.int64)
    return np.clip(idx, -half, half - 1), code


def band_dequantize(indices, code: int) -> np.ndarray:
    if code == SENTINEL_CODE:
        return np.zeros(len(indices))
    return np.asarray(indices, dtype=np.float64) * step_from_code(code)


# -- step table ---------------------------------------------------------------

def _put(cursor: BitCursor, value: int) -> None:
    rice_encode(np.array([value]), TABLE_RICE, cursor)


def step_table_encode(codes, cursor: BitCursor) -> BitCursor:
    """First code as raw 8 bits, then tokens: ``zigzag(delta) + 1`` for a
    literal delta, or ``0`` followed by ``run - 3`` for a run of >= 3 zero
    deltas.  Tokens are Rice coded with M=2."""
    codes = [int(c) for c in codes]
    if not codes:
        return cursor
    cursor.write_bits(codes[0] & 0xFF, 8)
    deltas = np.diff(codes)
    i = 0
    while i < len(deltas):
        run = 0
        while i + run < len(deltas) and deltas[i + run] == 0:
            run += 1
        if run >= MIN_RUN:
            _put(cursor, 0)
            _put(cursor, run - MIN_RUN)
            i += run
        else:
            _put(cursor, zigzag(int(deltas[i])) + 1)
            i += 1
    return cursor


def step_table_decode(cursor: BitCursor, count: int) -> list[int]:
    if count == 0:
        return []
    first = cursor.read_bits(8)
    codes = [first - 256 if first & 0x80 else first]
    while len(codes) < count:
        token = int(rice_decode(cursor, 1, TABLE_RICE)[0])
        if token == 0:
            run = int(rice_decode(cursor, 1, TABLE_RICE)[0]) + MIN_RUN
            if len(codes) + run > count:
                raise HeaderError("step table run overflows band count")
            codes.extend([codes[-1]] * run)
        else:
            code = codes[-1] + unzigzag(token - 1)
            if not SENTINEL_CODE <= code <= MAX_CODE:
                raise HeaderError("step code out of range")
            codes.append(code)
    return codes


# -- block codec --------------------------------------------------------------

@dataclass(frozen=True)
class FftHpfConfig:
    cr_target: float = 4.0
    cutoff: float = DEFAULT_CUTOFF_HZ
    band_size: int = DEFAULT_BAND_SIZE


def quant_bits(depth: int, cr_target: float) -> int:
    if cr_target < 1:
        raise ValueError("target compression ratio must be >= 1")
    d = int(math.floor(depth / cr_target + 0.5))
    if d < 1:
        raise ValueError(f"target ratio {cr_target} leaves less than one bit per value")
    return d


def nominal_payload_ratio(n_fft: int, rate: float, cutoff: float, depth: int, cr_target: float) -> float:
    """Compression ratio counting only the packed coefficient indices."""
    k0 = cutoff_bin(n_fft, rate, cutoff)
    kept = n_fft // 2 - k0 + 1
    return n_fft * depth / (2 * kept * quant_bits(depth, cr_target))


def _bands(n_values: int, band_size: int) -> list[slice]:
    width = 2 * band_size
    return [slice(s, min(s + width, n_values)) for s in range(0, n_values, width)]


def encode_audio_fft_hpf(
    block: SampleBlock,
    cr_target: float = 4.0,
    cutoff: float = DEFAULT_CUTOFF_HZ,
    band_size: int = DEFAULT_BAND_SIZE,
) -> CompressedPacket:
    """Compress an audio block; the stored cutoff is rounded up to whole Hz."""
    n, depth, rate = block.samples_per_channel, block.bit_depth, block.sample_rate
    d = quant_bits(depth, cr_target)
    if d > 32:
        raise ValueError("more than 32 bits per value is not supported")
    if band_size < 1 or band_size > 0xFFFF or n > 0xFFFF or block.channels > 0xFFFF:
        raise ValueError("block or band geometry exceeds header field widths")
    cutoff_hz = math.ceil(cutoff)
    if cutoff_hz > 0xFFFF:
        raise ValueError("cutoff does not fit the header")
    k0 = cutoff_bin(n, rate, cutoff_hz)

    header = pack_prefix(CodecId.FFT_HPF) + _FIXED.pack(
        block.channels, n, depth, d, cutoff_hz, band_size, int(rate)
    )
    cursor = BitCursor()
    mask = (1 << d) - 1
    for channel in block.data:
        coeffs = np.fft.rfft(channel.astype(np.float64))[k0:]
        values = np.column_stack([coeffs.real, coeffs.imag]).reshape(-1)
        quantized = [band_quantize(values[s], d) for s in _bands(values.size, band_size)]
        step_table_encode([code for _, code in quantized], cursor)
        cursor.align()
        kept = [idx for idx, code in quantized if code != SENTINEL_CODE]
        if kept:
            idx = np.concatenate(kept) & mask
            shifts = np.arange(d - 1, -1, -1, dtype=np.int64)
            cursor.write_bit_array(((idx[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1))
        cursor.align()
    return CompressedPacket(CodecId.FFT_HPF, header, cursor.buffer, block.raw_size, int(rate))


@dataclass(frozen=True)
class FftHpfHeader:
    channels: int
    n_fft: int
    bit_depth: int
    quant_bits: int
    cutoff_hz: int
    band_size: int
    sample_rate: int

    @classmethod
    def unpack(cls, header: bytes) -> "FftHpfHeader":
        if parse_prefix(header) != CodecId.FFT_HPF:
            raise UnknownCodecError("not an FFT-HPF packet")
        if len(header) != HEADER_SIZE:
            raise TruncatedPacketError("FFT-HPF header has the wrong length")
        h = cls(*_FIXED.unpack_from(header, 6))
        if (h.channels == 0 or h.n_fft < 2 or h.n_fft & (h.n_fft - 1) or not 1 <= h.bit_depth <= 32
                or not 1 <= h.quant_bits <= 32 or h.band_size == 0 or h.sample_rate == 0
                or h.cutoff_hz >= h.sample_rate / 2):
            raise HeaderError("FFT-HPF header fields out of range")
        return h


def decode_spectra(packet: CompressedPacket) -> tuple[FftHpfHeader, list[np.ndarray]]:
    """Dequantized half spectra, one per channel, with dropped bins zeroed."""
    if packet.codec_id != CodecId.FFT_HPF:
        raise UnknownCodecError(f"expected FFT_HPF packet, got {packet.codec_id.name}")
    h = FftHpfHeader.unpack(packet.header)
    k0 = cutoff_bin(h.n_fft, h.sample_rate, h.cutoff_hz)
    n_values = 2 * (h.n_fft // 2 - k0 + 1)
    bands = _bands(n_values, h.band_size)
    cursor = BitCursor(packet.payload)
    d = h.quant_bits
    spectra = []
    for _ in range(h.channels):
        codes = step_table_decode(cursor, len(bands))
        cursor.align()
        n_kept = sum(s.stop - s.start for s, c in zip(bands, codes) if c != SENTINEL_CODE)
        raw = cursor.read_bit_array(n_kept * d) if n_kept else np.zeros(0, dtype=np.uint8)
        cursor.align()
        weights = np.left_shift(np.int64(1), np.arange(d - 1, -1, -1, dtype=np.int64))
        idx = raw.reshape(-1, d).astype(np.int64) @ weights
        idx -= (idx >> (d - 1)) << d
        values = np.zeros(n_values)
        at = 0
        for s, code in zip(bands, codes):
            if code == SENTINEL_CODE:
                continue
            width = s.stop - s.start
            values[s] = band_dequantize(idx[at:at + width], code)
            at += width
        spectrum = np.zeros(h.n_fft // 2 + 1, dtype=np.complex128)
        spectrum[k0:] = values[0::2] + 1j * values[1::2]
        spectra.append(spectrum)
    if cursor.remaining:
        raise HeaderError("trailing bytes after the last channel")
    return h, spectra


def decode_audio_fft_hpf(packet: CompressedPacket) -> SampleBlock:
    h, spectra = decode_spectra(packet)
    lo, hi = sample_limits(h.bit_depth)
    data = np.empty((h.channels, h.n_fft), dtype=np.int64)
    for c, spectrum in enumerate(spectra):
        x = np.fft.irfft(spectrum, n=h.n_fft)
        data[c] = np.clip(np.rint(x), lo, hi).astype(np.int64)
    return SampleBlock(data, h.bit_depth, h.sample_rate or AUDIO_RATE_HZ, "audio")
