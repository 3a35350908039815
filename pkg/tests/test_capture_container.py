import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bladelink import synth
from bladelink.capture import (
    Capture,
    format_binary,
    format_csv,
    join_blocks,
    parse_binary,
    parse_csv,
    read_capture,
    split_blocks,
    write_capture,
)
from bladelink.codecs import encode_block
from bladelink.container import Container, ContainerError, parse_container
from bladelink.errors import HeaderError, TruncatedPacketError


def test_csv_format_exact():
    cap = Capture(np.array([[1, 2], [-3, 4]]), 100, 24, "pressure")
    assert format_csv(cap) == "# channels=2 rate=100 depth=24 kind=pressure\n1,-3\n2,4\n"
    assert parse_csv(format_csv(cap)) == cap


def test_csv_errors():
    with pytest.raises(HeaderError):
        parse_csv("1,2\n")
    with pytest.raises(HeaderError):
        parse_csv("# channels=2 rate=100 depth=24\n1,2\n3\n")
    with pytest.raises(HeaderError):
        parse_csv("# channels=1 rate=100 depth=24\nx\n")


def test_binary_header_layout():
    cap = Capture(np.array([[1, -1, 5]]), 16000, 16, "audio")
    data = format_binary(cap)
    assert data[:4] == b"ASRW" and len(data) == 18 + 3 * 2
    assert data[4:10] == bytes([1, 1, 1, 0, 16, 0])
    assert int.from_bytes(data[10:14], "little") == 16000 and int.from_bytes(data[14:18], "little") == 3
    assert data[18:] == np.array([1, -1, 5], "<i2").tobytes()


def test_binary_errors():
    cap = Capture(np.array([[1, -1, 5]]), 16000, 16, "audio")
    data = format_binary(cap)
    with pytest.raises(TruncatedPacketError):
        parse_binary(data[:-1])
    with pytest.raises(HeaderError):
        parse_binary(data[:4] + b"\x07" + data[5:])


@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(1, 300), st.integers(1, 32),
       st.sampled_from(["pressure", "audio"]))
def test_capture_round_trips(seed, channels, samples, depth, kind):
    rng = np.random.default_rng(seed)
    x = rng.integers(-(1 << (depth - 1)), 1 << (depth - 1), size=(channels, samples))
    cap = Capture(x, 100, depth, kind)
    assert parse_csv(format_csv(cap)) == cap
    assert parse_binary(format_binary(cap)) == cap


def test_read_write_files(tmp_path):
    cap = Capture(synth.pressure_channels(np.random.default_rng(1), channels=3, samples=100), 100, 24)
    write_capture(cap, tmp_path / "a.csv")
    write_capture(cap, tmp_path / "a.bin")
    assert read_capture(tmp_path / "a.csv") == cap == read_capture(tmp_path / "a.bin")


def test_split_pads_with_last_sample():
    cap = Capture(np.arange(130)[None, :], 100, 24)
    blocks, pad = split_blocks(cap, 64)
    assert pad == 62 and len(blocks) == 3
    assert (blocks[-1].data[0, 2:] == 129).all()
    assert join_blocks(blocks, pad) == cap


def test_container_round_trip_and_errors():
    cap = Capture(synth.pressure_channels(np.random.default_rng(2), channels=4, samples=1100), 100, 24)
    blocks, pad = split_blocks(cap)
    cont = Container([encode_block(b, "pressure-ll") for b in blocks], "pressure", 100, cap.samples, pad)
    data = cont.to_bytes()
    back = parse_container(data)
    assert [p.to_bytes() for p in back.packets] == [p.to_bytes() for p in cont.packets]
    assert (back.kind, back.sample_rate, back.total_samples, back.pad) == ("pressure", 100, 1100, pad)

    first_len = int.from_bytes(data[22:26], "little")
    cut = 22 + 4 + first_len + 10  # inside packet 1
    with pytest.raises(ContainerError) as err:
        parse_container(data[:cut])
    assert err.value.index == 1 and "packet 1" in str(err.value)

    bad = bytearray(data)
    bad[26] ^= 0xFF  # packet 0 magic
    with pytest.raises(ContainerError) as err:
        parse_container(bytes(bad))
    assert err.value.index == 0

    with pytest.raises(HeaderError):
        parse_container(data[:4] + b"\x02" + data[5:])
    with pytest.raises(ContainerError):
        parse_container(data + b"\x00")
