import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bladelink.codecs import decode_packet, parse_packet
from bladelink.core import (
    CodecId,
    SampleBlock,
    SensorEntry,
    SensorSuite,
    compute_raw_bandwidth,
    decode_raw,
    default_suite,
    encode_raw,
    serialize_block,
)
from bladelink.errors import HeaderError, TruncatedPacketError, UnknownCodecError


def test_block_shape_and_sizes():
    b = SampleBlock(np.zeros((40, 512), dtype=np.int64), 24, 100)
    assert (b.channels, b.samples_per_channel, b.raw_size) == (40, 512, 40 * 512 * 3)


@pytest.mark.parametrize("n", [63, 100, 32, 513])
def test_block_length_must_be_power_of_two(n):
    with pytest.raises(ValueError):
        SampleBlock(np.zeros((1, n)), 16, 100)


def test_block_range_is_twos_complement():
    SampleBlock(np.array([[-(1 << 23), (1 << 23) - 1] * 32]), 24, 100)
    with pytest.raises(ValueError):
        SampleBlock(np.array([[1 << 23] * 64]), 24, 100)


def test_block_is_immutable():
    b = SampleBlock(np.zeros((1, 64)), 8, 100)
    with pytest.raises(ValueError):
        b.data[0, 0] = 1


def test_raw_serialization_matches_struct_oracle():
    data = np.array([[1, -1, 0x123456, -(1 << 23)] * 16])
    b = SampleBlock(data, 24, 100)
    expect = b"".join(struct.pack("<i", int(v))[:3] for v in data.reshape(-1))
    assert serialize_block(b) == expect
    p = encode_raw(b)
    assert p.payload == expect
    assert p.codec_id == CodecId.RAW and len(p.header) == 12


@given(st.integers(1, 32), st.integers(1, 3), st.integers(0, 2**31))
def test_raw_round_trip(depth, channels, seed):
    rng = np.random.default_rng(seed)
    lo, hi = -(1 << (depth - 1)), (1 << (depth - 1)) - 1
    b = SampleBlock(rng.integers(lo, hi, size=(channels, 64), endpoint=True), depth, 100)
    p = parse_packet(encode_raw(b).to_bytes(), 100)
    assert decode_raw(p) == b
    assert decode_packet(p) == b


def test_raw_cr_close_to_one():
    b = SampleBlock(np.zeros((40, 512)), 24, 100)
    assert 0.99 < encode_raw(b).compression_ratio < 1.0


def test_prefix_errors():
    good = encode_raw(SampleBlock(np.zeros((1, 64)), 8, 100)).to_bytes()
    with pytest.raises(HeaderError):
        parse_packet(b"XXXX" + good[4:])
    with pytest.raises(HeaderError):
        parse_packet(good[:4] + b"\x09" + good[5:])
    with pytest.raises(UnknownCodecError):
        parse_packet(good[:5] + b"\x07" + good[6:])
    with pytest.raises(TruncatedPacketError):
        parse_packet(good[:3])
    with pytest.raises(TruncatedPacketError):
        decode_packet(parse_packet(good[:-1]))


def test_bandwidth_examples():
    mics = SensorSuite((SensorEntry("microphone", 10, 16000, 24),))
    baro = SensorSuite((SensorEntry("barometer", 40, 100, 24),))
    assert compute_raw_bandwidth(mics) == 3_840_000
    assert compute_raw_bandwidth(baro) == 96_000
    assert compute_raw_bandwidth(SensorSuite()) == 0


def test_default_suite_total():
    total = compute_raw_bandwidth(default_suite())
    assert total == 3_840_000 + 96_000 + 96_000 + 6 * 100 * 16 + 3 * 12.5 * 16
    assert 4.0e6 <= total <= 4.3e6


def test_bandwidth_overflow():
    suite = SensorSuite((SensorEntry("huge", 2**40, 2**20, 2**10),))
    with pytest.raises(OverflowError):
        compute_raw_bandwidth(suite)


def test_sensor_entry_validation():
    with pytest.raises(ValueError):
        SensorEntry("x", 0, 100, 24)
