"""Bit-level reader/writer used by every codec container.

Bits are stored most-significant-first within each byte.  A cursor is
append-only for writing and random-position for reading: writes always go
to the end of the buffer, reads start at ``bit_position``.
"""

from __future__ import annotations

import numpy as np

from .errors import TruncatedPacketError

MAX_FIELD_BITS = 64


class BitCursor:
    """Growable MSB-first bit buffer with a read/write position.

    A freshly constructed cursor over existing bytes starts at position 0
    (reader).  An empty cursor is a writer; after writing, call
    :meth:`rewind` to read the data back.
    """

    def __init__(self, buffer: bytes | bytearray = b"", bit_position: int = 0):
        self._buf = bytearray(buffer)
        self._bit_length = 8 * len(self._buf)
        if not 0 <= bit_position <= self._bit_length:
            raise ValueError("bit_position outside buffer")
        self.bit_position = bit_position
        self._unpacked: np.ndarray | None = None

    @property
    def buffer(self) -> bytes:
        return bytes(self._buf)

    @property
    def bit_length(self) -> int:
        """Number of valid bits in the buffer."""
        return self._bit_length

    @property
    def remaining(self) -> int:
        return self._bit_length - self.bit_position

    def __len__(self) -> int:
        return len(self._buf)

    def rewind(self) -> "BitCursor":
        self.bit_position = 0
        return self

    # -- writing ---------------------------------------------------------

    def _check_append(self) -> None:
        if self.bit_position != self._bit_length:
            raise ValueError("writes are only allowed at the end of the buffer")

    def write_bits(self, value: int, n: int) -> "BitCursor":
        if not 1 <= n <= MAX_FIELD_BITS:
            raise ValueError(f"bit count {n} outside [1, {MAX_FIELD_BITS}]")
        value = int(value)
        if value < 0 or value >> n:
            raise ValueError(f"value {value} does not fit in {n} bits")
        self._check_append()
        self._append_int(value, n)
        return self

    def _append_int(self, value: int, n: int) -> None:
        used = self._bit_length % 8
        if used:
            prefix = self._buf.pop() >> (8 - used)
            value |= prefix << n
            n += used
        pad = -n % 8
        self._buf.extend((value << pad).to_bytes((n + pad) // 8, "big"))
        self._bit_length = self._bit_length - used + n
        self.bit_position = self._bit_length
        self._unpacked = None

    def write_bit_array(self, bits: np.ndarray) -> "BitCursor":
        """Append an array of 0/1 values (one bit per element)."""
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.size == 0:
            return self
        self._check_append()
        used = self._bit_length % 8
        if used:
            head = np.unpackbits(np.frombuffer(self._buf[-1:], dtype=np.uint8))[:used]
            bits = np.concatenate([head, bits])
            del self._buf[-1]
        self._buf.extend(np.packbits(bits).tobytes())
        self._bit_length = self._bit_length - used + bits.size
        self.bit_position = self._bit_length
        self._unpacked = None
        return self

    def write_bytes(self, data: bytes) -> "BitCursor":
        """Append whole bytes; the cursor must be byte-aligned."""
        self._check_append()
        if self._bit_length % 8:
            raise ValueError("write_bytes requires byte alignment")
        self._buf.extend(data)
        self._bit_length += 8 * len(data)
        self.bit_position = self._bit_length
        self._unpacked = None
        return self

    def align(self) -> "BitCursor":
        """Advance to the next byte boundary (zero padding when writing)."""
        if self.bit_position == self._bit_length:
            # writer side: the trailing partial byte is already zero padded
            self._bit_length += -self._bit_length % 8
            self.bit_position = self._bit_length
        else:
            self.bit_position = min(self.bit_position + (-self.bit_position % 8), self._bit_length)
        return self

    # -- reading ---------------------------------------------------------

    def _need(self, n: int) -> None:
        if n > self.remaining:
            raise TruncatedPacketError(
                f"need {n} bits at bit {self.bit_position}, only {self.remaining} left"
            )

    def read_bits(self, n: int) -> int:
        if not 1 <= n <= MAX_FIELD_BITS:
            raise ValueError(f"bit count {n} outside [1, {MAX_FIELD_BITS}]")
        self._need(n)
        start = self.bit_position
        first, last = start // 8, (start + n - 1) // 8
        chunk = int.from_bytes(self._buf[first:last + 1], "big")
        shift = 8 * (last + 1) - (start + n)
        self.bit_position += n
        return (chunk >> shift) & ((1 << n) - 1)

    def peek_bits(self, n: int) -> int:
        pos = self.bit_position
        value = self.read_bits(n)
        self.bit_position = pos
        return value

    def unpacked(self) -> np.ndarray:
        """All valid bits as a uint8 array (cached until the next write)."""
        if self._unpacked is None:
            self._unpacked = np.unpackbits(np.frombuffer(bytes(self._buf), dtype=np.uint8))[
                : self._bit_length
            ]
        return self._unpacked

    def read_bit_array(self, n: int) -> np.ndarray:
        self._need(n)
        bits = self.unpacked()[self.bit_position:self.bit_position + n]
        self.bit_position += n
        return bits

    def read_bytes(self, n: int) -> bytes:
        if self.bit_position % 8:
            raise ValueError("read_bytes requires byte alignment")
        self._need(8 * n)
        start = self.bit_position // 8
        self.bit_position += 8 * n
        return bytes(self._buf[start:start + n])


def write_bits(cursor: BitCursor, value: int, n: int) -> BitCursor:
    return cursor.write_bits(value, n)


def read_bits(cursor: BitCursor, n: int) -> int:
    return cursor.read_bits(n)
