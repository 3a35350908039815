"""Capture files: whole recordings on disk, as CSV or as a binary RAW dump.

CSV: a ``# channels=N rate=R depth=D kind=K`` header line, then one row per
sample instant with one integer column per channel.

Binary: an 18-byte little-endian header ("ASRW", version, kind, channels,
depth, reserved, rate, samples) followed by the channel-major RAW
serialization of all samples.
"""

from __future__ import annotations

import io
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import AUDIO_BLOCK, PRESSURE_BLOCK, SampleBlock, sample_bytes, sample_limits
from .errors import HeaderError, TruncatedPacketError

BINARY_MAGIC = b"ASRW"
BINARY_VERSION = 1
_BIN_HEADER = struct.Struct("<4sBBHBBII")
KINDS = ("pressure", "audio")
_HEADER_RE = re.compile(r"^#\s*(.*)$")


@dataclass(eq=False)
class Capture:
    data: np.ndarray  # (channels, samples) int64
    sample_rate: int
    bit_depth: int
    kind: str = "pressure"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.int64)
        if self.data.ndim != 2 or self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError("capture data must be a non-empty (channels, samples) matrix")
        if self.kind not in KINDS:
            raise ValueError(f"capture kind must be one of {KINDS}, got {self.kind!r}")
        if self.sample_rate <= 0 or not 1 <= self.bit_depth <= 32:
            raise ValueError("invalid sample rate or bit depth")
        lo, hi = sample_limits(self.bit_depth)
        if self.data.min() < lo or self.data.max() > hi:
            raise ValueError(f"capture samples exceed the {self.bit_depth}-bit signed range")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def samples(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Capture):
            return NotImplemented
        return (self.sample_rate, self.bit_depth, self.kind) == (other.sample_rate, other.bit_depth, other.kind) \
            and np.array_equal(self.data, other.data)


def default_block_size(kind: str) -> int:
    return AUDIO_BLOCK if kind == "audio" else PRESSURE_BLOCK


def split_blocks(capture: Capture, block_size: int | None = None) -> tuple[list[SampleBlock], int]:
    """Cut a capture into blocks, padding the last one by repeating its final sample.

    Returns the blocks and the pad length.
    """
    n = block_size or default_block_size(capture.kind)
    pad = (-capture.samples) % n
    data = capture.data
    if pad:
        data = np.concatenate([data, np.repeat(data[:, -1:], pad, axis=1)], axis=1)
    blocks = [SampleBlock(data[:, i:i + n], capture.bit_depth, capture.sample_rate, capture.kind)
              for i in range(0, data.shape[1], n)]
    return blocks, pad


def join_blocks(blocks: list[SampleBlock], pad: int = 0, kind: str | None = None) -> Capture:
    if not blocks:
        raise ValueError("no blocks to join")
    data = np.concatenate([b.data for b in blocks], axis=1)
    if pad:
        data = data[:, :-pad]
    first = blocks[0]
    return Capture(data, first.sample_rate, first.bit_depth, kind or first.kind)


# -- CSV --------------------------------------------------------------------

def format_csv(capture: Capture) -> str:
    buf = io.StringIO()
    buf.write(f"# channels={capture.channels} rate={capture.sample_rate} "
              f"depth={capture.bit_depth} kind={capture.kind}\n")
    for row in capture.data.T:
        buf.write(",".join(map(str, row.tolist())))
        buf.write("\n")
    return buf.getvalue()


def parse_csv(text: str, source: str = "<csv>") -> Capture:
    lines = text.splitlines()
    if not lines:
        raise HeaderError(f"{source}: empty capture file")
    m = _HEADER_RE.match(lines[0].strip())
    if not m:
        raise HeaderError(f"{source}: missing '# channels=N rate=R depth=D kind=K' header")
    fields = dict(tok.split("=", 1) for tok in m.group(1).split() if "=" in tok)
    try:
        channels, rate, depth = int(fields["channels"]), int(fields["rate"]), int(fields["depth"])
        kind = fields.get("kind", "pressure")
    except (KeyError, ValueError):
        raise HeaderError(f"{source}: header must give integer channels, rate and depth") from None
    rows = [ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise HeaderError(f"{source}: capture has no samples")
    try:
        data = np.array([[int(v) for v in ln.split(",")] for ln in rows], dtype=np.int64)
    except ValueError as exc:
        raise HeaderError(f"{source}: non-integer sample ({exc})") from None
    if data.ndim != 2 or data.shape[1] != channels:
        raise HeaderError(f"{source}: rows do not all have {channels} columns")
    return Capture(data.T.copy(), rate, depth, kind)


# -- binary ------------------------------------------------------------------

def format_binary(capture: Capture) -> bytes:
    header = _BIN_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, KINDS.index(capture.kind), capture.channels,
                              capture.bit_depth, 0, capture.sample_rate, capture.samples)
    # same cell layout as the RAW block serialization
    width = sample_bytes(capture.bit_depth)
    body = capture.data.reshape(-1).astype("<i8").view(np.uint8).reshape(-1, 8)[:, :width].tobytes()
    return header + body


def parse_binary(data: bytes, source: str = "<binary>") -> Capture:
    if len(data) < _BIN_HEADER.size:
        raise TruncatedPacketError(f"{source}: shorter than the capture header")
    magic, version, kind, channels, depth, _, rate, samples = _BIN_HEADER.unpack_from(data)
    if magic != BINARY_MAGIC:
        raise HeaderError(f"{source}: bad magic {magic!r}")
    if version != BINARY_VERSION:
        raise HeaderError(f"{source}: unsupported capture version {version}")
    if kind >= len(KINDS) or channels == 0 or not 1 <= depth <= 32:
        raise HeaderError(f"{source}: header fields out of range")
    width = sample_bytes(depth)
    body = data[_BIN_HEADER.size:]
    if len(body) != channels * samples * width:
        raise TruncatedPacketError(f"{source}: body holds {len(body)} bytes, expected {channels * samples * width}")
    cells = np.frombuffer(body, dtype=np.uint8).reshape(-1, width)
    wide = np.zeros((cells.shape[0], 8), dtype=np.uint8)
    wide[:, :width] = cells
    wide[:, width:] = np.where(cells[:, -1:] & 0x80, 0xFF, 0).astype(np.uint8)
    return Capture(wide.view("<i8").reshape(channels, samples), rate, depth, KINDS[kind])


def read_capture(path: str | Path) -> Capture:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] == BINARY_MAGIC:
        return parse_binary(data, str(path))
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError:
        raise HeaderError(f"{path}: neither a binary nor a CSV capture") from None
    return parse_csv(text, str(path))


def write_capture(capture: Capture, path: str | Path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or ("binary" if path.suffix in (".bin", ".asrw") else "csv")
    if fmt == "binary":
        path.write_bytes(format_binary(capture))
    elif fmt == "csv":
        path.write_text(format_csv(capture))
    else:
        raise ValueError(f"unknown capture format {fmt!r}")
