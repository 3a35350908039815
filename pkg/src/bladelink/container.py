"""Container files holding a sequence of compressed packets.

Layout (little-endian)::

    "ASNS" | version u8 | count u32 | kind u8 | rate u32 | samples u32 | pad u32
    then ``count`` times: length u32 | packet bytes

``samples`` is the per-channel length of the original capture and ``pad``
the number of repeated samples appended to fill the last block.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

from .capture import KINDS
from .codecs import parse_packet
from .core import CompressedPacket
from .errors import CodecError, HeaderError, TruncatedPacketError

MAGIC = b"ASNS"
VERSION = 1
_HEADER = struct.Struct("<4sBIBIII")
_LEN = struct.Struct("<I")


class ContainerError(CodecError):
    """A packet inside a container is corrupt; ``index`` names the first bad one."""

    def __init__(self, index: int, reason: str):
        super().__init__(f"packet {index}: {reason}")
        self.index = index


@dataclass
class Container:
    packets: list[CompressedPacket] = field(default_factory=list)
    kind: str = "pressure"
    sample_rate: int = 100
    total_samples: int = 0
    pad: int = 0

    def to_bytes(self) -> bytes:
        out = [_HEADER.pack(MAGIC, VERSION, len(self.packets), KINDS.index(self.kind),
                            self.sample_rate, self.total_samples, self.pad)]
        for p in self.packets:
            body = p.to_bytes()
            out.append(_LEN.pack(len(body)))
            out.append(body)
        return b"".join(out)

    @property
    def original_size(self) -> int:
        return sum(p.original_size for p in self.packets)

    @property
    def stored_size(self) -> int:
        return sum(p.size for p in self.packets)


def parse_container(data: bytes) -> Container:
    if len(data) < _HEADER.size:
        raise TruncatedPacketError("container shorter than its header")
    magic, version, count, kind, rate, total, pad = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise HeaderError(f"bad container magic {magic!r}")
    if version != VERSION:
        raise HeaderError(f"unsupported container version {version} (this build reads version {VERSION})")
    if kind >= len(KINDS) or rate == 0:
        raise HeaderError("container header fields out of range")
    pos = _HEADER.size
    packets = []
    for i in range(count):
        if pos + _LEN.size > len(data):
            raise ContainerError(i, "length prefix missing (file truncated)")
        (n,) = _LEN.unpack_from(data, pos)
        pos += _LEN.size
        if pos + n > len(data):
            raise ContainerError(i, f"declares {n} bytes but only {len(data) - pos} remain")
        try:
            packets.append(parse_packet(data[pos:pos + n], rate))
        except CodecError as exc:
            raise ContainerError(i, str(exc)) from exc
        pos += n
    if pos != len(data):
        raise ContainerError(count, f"{len(data) - pos} trailing bytes after the last packet")
    return Container(packets, KINDS[kind], rate, total, pad)


def read_container(path: str | Path) -> Container:
    return parse_container(Path(path).read_bytes())


def write_container(container: Container, path: str | Path) -> None:
    Path(path).write_bytes(container.to_bytes())
