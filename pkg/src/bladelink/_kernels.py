"""Compiled inner loops for Rice coding.

Bit arrays are uint8 arrays holding one bit per element, MSB-first order.
Decoders return the new bit position, or -1 when the stream ends early.
"""

import numba
import numpy as np

ESCAPE_RUN = 48
ESCAPE_BITS = 32


@numba.njit(cache=True)
def rice_encode_into(values, m, out, pos):
    # ``out`` must be zero-filled; only the one bits are written
    for i in range(values.size):
        v = values[i]
        q = v >> m
        if q < ESCAPE_RUN:
            for _ in range(q):
                out[pos] = 1
                pos += 1
            pos += 1
            for b in range(m - 1, -1, -1):
                out[pos] = (v >> b) & 1
                pos += 1
        else:
            for _ in range(ESCAPE_RUN):
                out[pos] = 1
                pos += 1
            for b in range(ESCAPE_BITS - 1, -1, -1):
                out[pos] = (v >> b) & 1
                pos += 1
    return pos


@numba.njit(cache=True)
def rice_decode_into(bits, pos, count, m, out):
    n = bits.size
    for i in range(count):
        q = 0
        while True:
            if pos >= n:
                return -1
            if bits[pos] == 0:
                pos += 1
                break
            q += 1
            pos += 1
            if q == ESCAPE_RUN:
                break
        if q == ESCAPE_RUN:
            if pos + ESCAPE_BITS > n:
                return -1
            v = 0
            for b in range(ESCAPE_BITS):
                v = (v << 1) | bits[pos + b]
            pos += ESCAPE_BITS
        else:
            if pos + m > n:
                return -1
            r = 0
            for b in range(m):
                r = (r << 1) | bits[pos + b]
            pos += m
            v = (q << m) | r
        out[i] = v
    return pos


def rice_lengths(values: np.ndarray, m) -> np.ndarray:
    """Per-value code length in bits; ``m`` may broadcast against ``values``."""
    q = values >> m
    return np.where(q < ESCAPE_RUN, q + 1 + m, ESCAPE_RUN + ESCAPE_BITS)


def pack_fixed(values: np.ndarray, width: int) -> np.ndarray:
    """Unsigned values -> flat bit array, ``width`` bits each."""
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((np.asarray(values, dtype=np.int64)[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


def unpack_fixed(bits: np.ndarray, width: int) -> np.ndarray:
    weights = np.left_shift(np.int64(1), np.arange(width - 1, -1, -1, dtype=np.int64))
    return bits.reshape(-1, width).astype(np.int64) @ weights
