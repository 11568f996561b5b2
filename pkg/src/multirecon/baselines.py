"""Comparison methods: plain compression, single-display optimization, deblur-then-compress."""

from __future__ import annotations

from multirecon.admm import AdmmConfig, encode_for_network
from multirecon.codec.base import Codec
from multirecon.core import Bitstream, DegradationEnsemble, Signal, expected_psnr
from multirecon.solver import tikhonov_deconvolve

# log-spaced sweep for the deblur-then-compress baseline's regularizer
PREDECONV_WEIGHTS = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)


def regular_encode(x: Signal, codec: Codec, theta: int) -> Bitstream:
    """Compress ``x`` with no pre-processing at all."""
    return codec.compress(x, theta)


def single_display_encode(x: Signal, ensemble: DegradationEnsemble, codec: Codec,
                          cfg: AdmmConfig) -> Bitstream:
    """Network-optimized encode that only knows the most probable display."""
    b, _ = encode_for_network(x, ensemble.most_probable(), codec, cfg)
    return b


def predeconv_encode(x: Signal, ensemble: DegradationEnsemble, codec: Codec, theta: int,
                     reg_weight: float) -> Bitstream:
    """Tikhonov-deblur ``x`` against the ensemble fidelity, then compress normally."""
    w = tikhonov_deconvolve(x, ensemble, reg_weight)
    return codec.compress(w, theta)


def best_predeconv_encode(x: Signal, ensemble: DegradationEnsemble, codec: Codec, theta: int,
                          reg_weights=PREDECONV_WEIGHTS) -> tuple[Bitstream, float]:
    """Deblur-then-compress with the regularizer weight that maximizes expected PSNR at ``theta``.

    Returns the winning stream and its weight. Ties go to the smaller stream.
    """
    if not reg_weights:
        raise ValueError("reg_weights is empty")
    best = None
    for mu in reg_weights:
        b = predeconv_encode(x, ensemble, codec, theta, mu)
        score = (expected_psnr(x, codec.decompress(b), ensemble), -codec.rate_of(b))
        if best is None or score > best[0]:
            best = (score, b, mu)
    return best[1], best[2]
