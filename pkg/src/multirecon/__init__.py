"""Compression tuned for a network of displays that blur what they show.

An ADMM loop alternates a standard image codec with a multi-operator
deconvolution so that the decoded image, after each display's blur,
stays close to the source on average.
"""

from multirecon.admm import AdmmConfig, AdmmTrace, beta_tilde_schedule, encode_for_network
from multirecon.codec import Codec, ReferenceCodec
from multirecon.core import (
    Bitstream,
    BlurOperator,
    BoundaryMode,
    DegradationEnsemble,
    Signal,
    expected_distortion,
    expected_psnr,
)
from multirecon.operators import gaussian_blur

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig",
    "AdmmTrace",
    "Bitstream",
    "BlurOperator",
    "BoundaryMode",
    "Codec",
    "DegradationEnsemble",
    "ReferenceCodec",
    "Signal",
    "beta_tilde_schedule",
    "encode_for_network",
    "expected_distortion",
    "expected_psnr",
    "gaussian_blur",
]
