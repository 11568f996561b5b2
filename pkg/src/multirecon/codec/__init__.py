"""Standard compression back ends: the built-in reference codec and an external adapter."""

from multirecon.codec.base import Codec, ReferenceCodec
from multirecon.codec.entropy import (
    BitstreamError,
    InvalidCodewordError,
    MalformedHeaderError,
    TruncatedPayloadError,
)
from multirecon.codec.reference import quant_step, reference_compress, reference_decompress

__all__ = [
    "BitstreamError",
    "Codec",
    "InvalidCodewordError",
    "MalformedHeaderError",
    "ReferenceCodec",
    "TruncatedPayloadError",
    "quant_step",
    "reference_compress",
    "reference_decompress",
]
