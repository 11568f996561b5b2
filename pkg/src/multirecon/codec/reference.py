"""Self-contained 8x8 block-DCT reference codec.

Wire format (big-endian header, 10 bytes)::

    magic      4 bytes  b"NCR1"
    width      uint16
    height     uint16
    theta      uint8    quality index 0..51
    block_size uint8    always 8

followed by an Exp-Golomb payload. Blocks are visited in raster order;
each contributes the code words

    se(dc - previous_dc), ue(n_ac), then n_ac pairs of (ue(run), nz(level))

where ``run`` counts zero AC coefficients in zigzag order before each
nonzero ``level``. The payload is zero padded to a byte boundary and
``Bitstream.bit_length`` counts header plus payload bits exactly.
"""

from __future__ import annotations

import struct
from functools import lru_cache

import numpy as np

from multirecon.codec.entropy import (
    BitstreamError,
    InvalidCodewordError,
    MalformedHeaderError,
    TruncatedPayloadError,
    decode_ue,
    encode_ue,
    nonzero_to_unsigned,
    pack_bits,
    signed_to_unsigned,
    unpack_bits,
    unsigned_to_nonzero,
    unsigned_to_signed,
)
from multirecon.core import DEFAULT_PEAK, Bitstream, Signal

MAGIC = b"NCR1"
BLOCK = 8
HEADER = struct.Struct(">4sHHBB")
HEADER_BITS = 8 * HEADER.size
THETA_MIN, THETA_MAX = 0, 51


def quant_step(theta: float) -> float:
    """HEVC-style QP to step mapping: the step doubles every 6 QP units."""
    return 2.0 ** ((theta - 4) / 6.0)


@lru_cache(maxsize=None)
def dct_matrix(n: int = BLOCK) -> np.ndarray:
    """Orthonormal DCT-II matrix; rows are basis functions."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    c = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    c[0] /= np.sqrt(2.0)
    c.setflags(write=False)
    return c


@lru_cache(maxsize=None)
def zigzag_order(n: int = BLOCK) -> np.ndarray:
    """Flat indices of an ``n x n`` block in JPEG zigzag order."""
    def key(rc: tuple[int, int]) -> tuple[int, int]:
        r, c = rc
        s = r + c
        return s, (r if s % 2 else c)

    cells = sorted(((r, c) for r in range(n) for c in range(n)), key=key)
    order = np.array([r * n + c for r, c in cells])
    order.setflags(write=False)
    return order


def inverse_amplification(n: int = BLOCK) -> float:
    """Worst-case sup-norm gain of the 2-D inverse DCT on unit-bounded coefficients."""
    col = np.abs(dct_matrix(n)).sum(axis=0).max()
    return float(col * col)


def forward_blocks(blocks: np.ndarray) -> np.ndarray:
    c = dct_matrix(blocks.shape[-1])
    return c @ blocks @ c.T


def inverse_blocks(coeffs: np.ndarray) -> np.ndarray:
    c = dct_matrix(coeffs.shape[-1])
    return c.T @ coeffs @ c


def _to_blocks(pixels: np.ndarray) -> np.ndarray:
    h, w = pixels.shape
    ph, pw = -h % BLOCK, -w % BLOCK
    padded = np.pad(pixels, ((0, ph), (0, pw)), mode="edge")
    bh, bw = padded.shape[0] // BLOCK, padded.shape[1] // BLOCK
    return padded.reshape(bh, BLOCK, bw, BLOCK).swapaxes(1, 2).reshape(-1, BLOCK, BLOCK)


def _from_blocks(blocks: np.ndarray, width: int, height: int) -> np.ndarray:
    bh, bw = -(-height // BLOCK), -(-width // BLOCK)
    full = blocks.reshape(bh, bw, BLOCK, BLOCK).swapaxes(1, 2).reshape(bh * BLOCK, bw * BLOCK)
    return full[:height, :width]


def _check_theta(theta: int) -> int:
    if int(theta) != theta or not THETA_MIN <= theta <= THETA_MAX:
        raise ValueError(f"theta must be an integer in [{THETA_MIN}, {THETA_MAX}], got {theta}")
    return int(theta)


def quantize(s: Signal, theta: int) -> np.ndarray:
    """Quantized coefficients, shape ``(n_blocks, 64)`` in zigzag order."""
    coeffs = forward_blocks(_to_blocks(s.pixels)).reshape(-1, BLOCK * BLOCK)
    q = np.rint(coeffs / quant_step(theta)).astype(np.int64)
    return q[:, zigzag_order()]


def dequantize(levels: np.ndarray, theta: int, width: int, height: int) -> np.ndarray:
    coeffs = np.empty(levels.shape, dtype=np.float64)
    coeffs[:, zigzag_order()] = levels * quant_step(theta)
    pixels = inverse_blocks(coeffs.reshape(-1, BLOCK, BLOCK))
    return _from_blocks(pixels, width, height)


def block_symbols(levels: np.ndarray) -> np.ndarray:
    """Flatten zigzag-ordered blocks into the unsigned symbol stream."""
    nb = levels.shape[0]
    dc = levels[:, 0]
    dc_diff = np.diff(dc, prepend=0)
    ac = levels[:, 1:]
    rows, cols = np.nonzero(ac)
    counts = np.bincount(rows, minlength=nb)

    prev = np.empty_like(cols)
    prev[0:1] = -1
    prev[1:] = cols[:-1]
    new_block = np.ones(rows.size, dtype=bool)
    new_block[1:] = rows[1:] != rows[:-1]
    prev[new_block] = -1
    runs = cols - prev - 1

    per_block = 2 + 2 * counts
    offsets = np.concatenate(([0], np.cumsum(per_block)[:-1]))
    symbols = np.empty(int(per_block.sum()), dtype=np.int64)
    symbols[offsets] = signed_to_unsigned(dc_diff)
    symbols[offsets + 1] = counts
    first_pair = np.concatenate(([0], np.cumsum(counts)[:-1]))
    rank = np.arange(rows.size) - first_pair[rows]
    pair_pos = offsets[rows] + 2 + 2 * rank
    symbols[pair_pos] = runs
    symbols[pair_pos + 1] = nonzero_to_unsigned(ac[rows, cols])
    return symbols


def parse_symbols(symbols: np.ndarray, n_blocks: int) -> tuple[np.ndarray, int]:
    """Rebuild zigzag-ordered blocks from the symbol stream.

    Returns the levels and the number of symbols consumed.
    """
    sym = symbols.tolist()
    total = len(sym)
    heads = []
    pos = 0
    for _ in range(n_blocks):
        if pos + 2 > total:
            raise TruncatedPayloadError("payload ends before all blocks are decoded")
        n = sym[pos + 1]
        if n > BLOCK * BLOCK - 1:
            raise InvalidCodewordError(f"block declares {n} AC coefficients")
        heads.append((pos, n))
        pos += 2 + 2 * n
        if pos > total:
            raise TruncatedPayloadError("payload ends inside a block")

    head_pos = np.array([h for h, _ in heads], dtype=np.int64)
    counts = np.array([n for _, n in heads], dtype=np.int64)
    levels = np.zeros((n_blocks, BLOCK * BLOCK), dtype=np.int64)
    levels[:, 0] = np.cumsum(unsigned_to_signed(symbols[head_pos]))

    rows = np.repeat(np.arange(n_blocks), counts)
    if rows.size:
        first_pair = np.concatenate(([0], np.cumsum(counts)[:-1]))
        rank = np.arange(rows.size) - first_pair[rows]
        pair_pos = head_pos[rows] + 2 + 2 * rank
        steps = symbols[pair_pos] + 1
        cum = np.cumsum(steps)
        first = first_pair[rows]
        # zero-based index into the 63 AC coefficients
        col = cum - (cum[first] - steps[first]) - 1
        if col.max() > BLOCK * BLOCK - 2:
            raise InvalidCodewordError("run lengths overflow the block")
        levels[rows, 1 + col] = unsigned_to_nonzero(symbols[pair_pos + 1])
    return levels, pos


def reference_compress(s: Signal, theta: int) -> Bitstream:
    """Encode ``s`` at quality index ``theta``; samples outside ``[0, peak]`` are kept."""
    theta = _check_theta(theta)
    if s.width < BLOCK or s.height < BLOCK:
        raise ValueError(f"image {s.width}x{s.height} is smaller than one {BLOCK}x{BLOCK} block")
    if s.width > 0xFFFF or s.height > 0xFFFF:
        raise ValueError("image dimensions exceed 16-bit header fields")
    bits = encode_ue(block_symbols(quantize(s, theta)))
    header = HEADER.pack(MAGIC, s.width, s.height, theta, BLOCK)
    return Bitstream(header + pack_bits(bits), HEADER_BITS + bits.size)


def parse_header(data: bytes) -> tuple[int, int, int]:
    """Validate the header; returns ``(width, height, theta)``."""
    if len(data) < HEADER.size:
        raise MalformedHeaderError(f"stream of {len(data)} bytes is shorter than the header")
    magic, width, height, theta, block = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MalformedHeaderError(f"bad magic {magic!r}")
    if block != BLOCK:
        raise MalformedHeaderError(f"unsupported block size {block}")
    if not THETA_MIN <= theta <= THETA_MAX:
        raise MalformedHeaderError(f"theta {theta} out of range")
    if width < BLOCK or height < BLOCK:
        raise MalformedHeaderError(f"invalid dimensions {width}x{height}")
    return width, height, theta


def decode_levels(data: bytes) -> tuple[np.ndarray, int, int, int, int]:
    """Parse a stream into ``(levels, width, height, theta, bit_length)``."""
    width, height, theta = parse_header(data)
    n_blocks = -(-width // BLOCK) * -(-height // BLOCK)
    payload = unpack_bits(data[HEADER.size:])
    symbols, used_bits = decode_ue(payload)
    levels, used_symbols = parse_symbols(symbols, n_blocks)
    if used_symbols != symbols.size:
        raise InvalidCodewordError(f"{symbols.size - used_symbols} trailing code words after last block")
    return levels, width, height, theta, HEADER_BITS + used_bits


def reference_decompress(b: Bitstream | bytes, peak: float = DEFAULT_PEAK) -> Signal:
    """Decode a reference stream; the output is not clamped."""
    data = b.data if isinstance(b, Bitstream) else bytes(b)
    levels, width, height, theta, _ = decode_levels(data)
    return Signal(dequantize(levels, theta, width, height), peak)


def read_bitstream(data: bytes) -> Bitstream:
    """Wrap raw file bytes, recovering the exact bit length by parsing."""
    *_, bit_length = decode_levels(data)
    if len(data) != -(-bit_length // 8):
        raise BitstreamError("stream has trailing bytes beyond the payload")
    return Bitstream(data, bit_length)
