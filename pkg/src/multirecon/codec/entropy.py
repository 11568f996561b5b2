"""Vectorized Exp-Golomb coding of non-negative integer symbol streams.

A code word for ``v`` is ``m`` zeros followed by the ``m + 1`` bit binary
form of ``v + 1``, where ``m = floor(log2(v + 1))``.
"""

from __future__ import annotations

import numpy as np

MAX_PREFIX = 40


class BitstreamError(ValueError):
    """Base class for every bitstream parse failure."""


class MalformedHeaderError(BitstreamError):
    pass


class TruncatedPayloadError(BitstreamError):
    pass


class InvalidCodewordError(BitstreamError):
    pass


def signed_to_unsigned(k: np.ndarray) -> np.ndarray:
    """Interleave signed integers: 0, 1, -1, 2, -2, ... -> 0, 1, 2, 3, 4, ..."""
    k = np.asarray(k, dtype=np.int64)
    return np.where(k > 0, 2 * k - 1, -2 * k)


def unsigned_to_signed(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=np.int64)
    return np.where(u % 2 == 1, (u + 1) // 2, -(u // 2))


def nonzero_to_unsigned(k: np.ndarray) -> np.ndarray:
    """Like :func:`signed_to_unsigned` but skips zero: 1, -1, 2, -2, ... -> 0, 1, 2, 3, ..."""
    return signed_to_unsigned(k) - 1


def unsigned_to_nonzero(u: np.ndarray) -> np.ndarray:
    return unsigned_to_signed(np.asarray(u, dtype=np.int64) + 1)


def _prefix_lengths(values: np.ndarray) -> np.ndarray:
    # floor(log2(v + 1)), exact for v < 2**52
    _, exp = np.frexp((values + 1).astype(np.float64))
    return exp.astype(np.int64) - 1


def ue_lengths(values: np.ndarray) -> np.ndarray:
    """Code word length in bits for each value."""
    return 2 * _prefix_lengths(np.asarray(values, dtype=np.int64)) + 1


def encode_ue(values: np.ndarray) -> np.ndarray:
    """Encode values as a flat array of bits (one ``uint8`` per bit)."""
    values = np.asarray(values, dtype=np.int64).ravel()
    if values.size and values.min() < 0:
        raise ValueError("Exp-Golomb values must be non-negative")
    if values.size and values.max() >= 2 ** MAX_PREFIX - 1:
        raise ValueError("Exp-Golomb value out of range")
    m = _prefix_lengths(values)
    lengths = 2 * m + 1
    starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    total = int(lengths.sum())
    bits = np.zeros(total, dtype=np.uint8)
    if total == 0:
        return bits
    nbits = m + 1
    owner = np.repeat(np.arange(values.size), nbits)
    first = np.concatenate(([0], np.cumsum(nbits)[:-1]))
    j = np.arange(owner.size) - np.repeat(first, nbits)
    shift = m[owner] - j
    bits[starts[owner] + m[owner] + j] = ((values[owner] + 1) >> shift) & 1
    return bits


def decode_ue(bits: np.ndarray) -> tuple[np.ndarray, int]:
    """Decode every complete code word in ``bits``.

    Decoding stops at the first position after which no ``1`` bit remains
    (zero padding). Returns the values and the number of bits consumed.

    Raises:
        TruncatedPayloadError: a code word runs past the end of ``bits``.
        InvalidCodewordError: a prefix longer than the supported range.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    n = bits.size
    if not bits.any():
        return np.zeros(0, dtype=np.int64), 0
    marks = np.where(bits == 1, np.arange(n), n)
    next_one = np.minimum.accumulate(marks[::-1])[::-1]
    nxt = next_one.tolist()

    starts = []
    p = 0
    while p < n and nxt[p] < n:
        starts.append(p)
        p = 2 * nxt[p] - p + 1
    if p > n:
        raise TruncatedPayloadError(f"code word at bit {starts[-1]} runs past end of data")

    s = np.asarray(starts, dtype=np.int64)
    lead = next_one[s]
    m = lead - s
    if m.size and m.max() > MAX_PREFIX:
        raise InvalidCodewordError(f"code word prefix of {int(m.max())} zeros exceeds limit")
    nbits = m + 1
    owner = np.repeat(np.arange(s.size), nbits)
    first = np.concatenate(([0], np.cumsum(nbits)[:-1]))
    j = np.arange(owner.size) - np.repeat(first, nbits)
    weights = np.left_shift(bits[lead[owner] + j].astype(np.int64), m[owner] - j)
    values = np.bincount(owner, weights=weights.astype(np.float64), minlength=s.size)
    return values.astype(np.int64) - 1, p


def pack_bits(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def unpack_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))
