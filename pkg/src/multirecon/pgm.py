"""Binary PGM (P5) reading and writing, 8-bit grayscale."""

from __future__ import annotations

import os
import re
import tempfile
from pathlib import Path

import numpy as np

from multirecon.core import Signal


class PgmError(ValueError):
    pass


_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


def _tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    out = []
    pos = 0
    for _ in range(count):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise PgmError("truncated PGM header")
        out.append(m.group(1))
        pos = m.end()
    return out, pos


def decode_pgm(data: bytes) -> np.ndarray:
    """Parse P5 bytes into a ``uint8``/``uint16`` array."""
    tokens, pos = _tokens(data, 4)
    if tokens[0] != b"P5":
        raise PgmError(f"not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise PgmError("non-numeric PGM header field") from exc
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise PgmError(f"invalid PGM header {width}x{height} maxval {maxval}")
    pos += 1  # single whitespace byte before the raster
    dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
    need = width * height * dtype.itemsize
    raster = data[pos:pos + need]
    if len(raster) != need:
        raise PgmError(f"PGM raster truncated: {len(raster)} of {need} bytes")
    return np.frombuffer(raster, dtype=dtype).reshape(height, width).copy()


def read_pgm(path: str | Path) -> Signal:
    """Load a P5 file as a signal whose peak is the file's maxval."""
    data = Path(path).read_bytes()
    tokens, _ = _tokens(data, 4)
    arr = decode_pgm(data)
    return Signal(arr.astype(np.float64), float(int(tokens[3])))


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round; only done at export."""
    return np.clip(np.rint(pixels), 0, 255).astype(np.uint8)


def encode_pgm(pixels: np.ndarray) -> bytes:
    arr = to_uint8(pixels)
    h, w = arr.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + arr.tobytes()


def atomic_write(path: str | Path, data: bytes) -> None:
    """Write via a temp file in the same directory and rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_pgm(path: str | Path, s: Signal | np.ndarray) -> None:
    pixels = s.pixels if isinstance(s, Signal) else np.asarray(s)
    atomic_write(path, encode_pgm(pixels))
