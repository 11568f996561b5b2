"""Blur kernels, operator application, adjoints and DFT diagonalization."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import ndimage

from multirecon.core import BlurOperator, BoundaryMode, DimensionError, Signal


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Sampled Gaussian on a centered ``size x size`` grid, normalized to unit sum.

    Samples ``exp(-(i^2 + j^2) / (2 sigma^2))`` at integer offsets; the
    truncated tail mass is absorbed by the renormalization.
    """
    if int(size) != size or size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be a positive odd integer, got {size}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = size // 2
    offsets = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(offsets ** 2) / (2.0 * sigma * sigma))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def gaussian_blur(size: int, sigma: float,
                  boundary_mode: BoundaryMode = BoundaryMode.PERIODIC) -> BlurOperator:
    return BlurOperator(gaussian_kernel(size, sigma), boundary_mode)


def _check_fits(op: BlurOperator, shape: tuple[int, int]) -> None:
    kh, kw = op.kernel.shape
    if kh > shape[0] or kw > shape[1]:
        raise DimensionError(f"kernel {op.kernel.shape} larger than image {shape}")


def _fold_symmetric(a: np.ndarray, r: int, axis: int) -> np.ndarray:
    # adjoint of np.pad(..., mode="symmetric") along one axis
    if r == 0:
        return a
    a = np.moveaxis(a, axis, 0)
    core = a[r:-r].copy()
    core[:r] += a[:r][::-1]
    core[-r:] += a[-r:][::-1]
    return np.moveaxis(core, 0, axis)


def convolve_array(op: BlurOperator, image: np.ndarray) -> np.ndarray:
    """Apply ``op`` to a raw 2-D array."""
    _check_fits(op, image.shape)
    if op.kernel.shape == (1, 1):
        return image * op.kernel[0, 0]
    if op.boundary_mode is BoundaryMode.PERIODIC:
        return ndimage.convolve(image, op.kernel, mode="wrap")
    rh, rw = op.radius
    padded = np.pad(image, ((rh, rh), (rw, rw)), mode="symmetric")
    full = ndimage.convolve(padded, op.kernel, mode="constant")
    return full[rh:rh + image.shape[0], rw:rw + image.shape[1]]


def correlate_array(op: BlurOperator, image: np.ndarray) -> np.ndarray:
    """Apply the adjoint of ``op`` to a raw 2-D array."""
    _check_fits(op, image.shape)
    if op.kernel.shape == (1, 1):
        return image * op.kernel[0, 0]
    if op.boundary_mode is BoundaryMode.PERIODIC:
        return ndimage.correlate(image, op.kernel, mode="wrap")
    rh, rw = op.radius
    embedded = np.pad(image, ((rh, rh), (rw, rw)), mode="constant")
    full = ndimage.correlate(embedded, op.kernel, mode="constant")
    return _fold_symmetric(_fold_symmetric(full, rh, 0), rw, 1)


def apply(op: BlurOperator, s: Signal) -> Signal:
    """``H s``: convolution with the kernel under the operator's boundary mode."""
    return s.like(convolve_array(op, s.pixels))


def apply_adjoint(op: BlurOperator, s: Signal) -> Signal:
    """``H^T s``; for periodic boundaries this is correlation with the kernel."""
    return s.like(correlate_array(op, s.pixels))


@lru_cache(maxsize=64)
def _transfer_cached(op: BlurOperator, width: int, height: int) -> np.ndarray:
    kh, kw = op.kernel.shape
    rh, rw = op.radius
    padded = np.zeros((height, width))
    padded[:kh, :kw] = op.kernel
    padded = np.roll(padded, (-rh, -rw), axis=(0, 1))
    out = np.fft.fft2(padded)
    out.setflags(write=False)
    return out


def transfer_function(op: BlurOperator, width: int, height: int) -> np.ndarray:
    """DFT eigenvalues of the circulant operator on a ``height x width`` grid.

    ``apply(op, s)`` equals ``ifft2(transfer * fft2(s)).real``. Only defined
    for periodic boundaries.
    """
    if op.boundary_mode is not BoundaryMode.PERIODIC:
        raise ValueError("transfer function requires periodic boundary mode")
    _check_fits(op, (height, width))
    return _transfer_cached(op, int(width), int(height))


def save_kernel(path: str | Path, kernel: np.ndarray) -> None:
    """Write a kernel as whitespace-separated rows."""
    np.savetxt(path, np.asarray(kernel, dtype=np.float64), fmt="%.17g")


def load_kernel(path: str | Path) -> np.ndarray:
    kernel = np.loadtxt(path, dtype=np.float64, ndmin=2)
    if kernel.shape[0] % 2 == 0 or kernel.shape[1] % 2 == 0:
        raise ValueError(f"kernel in {path} has even dimensions {kernel.shape}")
    return kernel
