from __future__ import annotations

from abc import ABC, abstractmethod

from multirecon.core import Bitstream, Signal
from multirecon.codec import reference


class Codec(ABC):
    """A standard compress/decompress pair with a QP-like quality index.

    The optimization loop treats implementations as black boxes; they only
    need to be deterministic and preserve image dimensions.
    """

    name = "codec"
    theta_range: tuple[int, int] = (reference.THETA_MIN, reference.THETA_MAX)

    @abstractmethod
    def compress(self, s: Signal, theta: int) -> Bitstream: ...

    @abstractmethod
    def decompress(self, b: Bitstream) -> Signal: ...

    def rate_of(self, b: Bitstream) -> int:
        """Bit cost of a stream."""
        return b.bit_length

    def roundtrip(self, s: Signal, theta: int) -> tuple[Bitstream, Signal]:
        b = self.compress(s, theta)
        v = self.decompress(b)
        return b, s.like(v.pixels)


class ReferenceCodec(Codec):
    """The built-in 8x8 block-DCT codec (see :mod:`multirecon.codec.reference`)."""

    name = "reference"

    def compress(self, s: Signal, theta: int) -> Bitstream:
        return reference.reference_compress(s, theta)

    def decompress(self, b: Bitstream) -> Signal:
        return reference.reference_decompress(b)
