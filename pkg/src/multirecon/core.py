"""Domain types: signals, blur operators, degradation ensembles, bitstreams.

Also hosts the expected-distortion accounting that every other module
measures against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

DEFAULT_PEAK = 255.0
PROBABILITY_TOLERANCE = 1e-12


class DimensionError(ValueError):
    """Two signals (or a signal and an operator) have incompatible shapes."""


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Signal:
    """A real-valued grayscale image.

    ``pixels`` is stored as a 2-D ``(height, width)`` float64 array; the
    row-major flattening is the N-vector used by the optimization. Values
    are never clamped here: intermediate iterates routinely leave
    ``[0, peak]``.
    """

    pixels: np.ndarray
    peak: float = DEFAULT_PEAK

    def __post_init__(self) -> None:
        arr = np.array(self.pixels, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"signal must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("signal samples must be finite")
        if self.peak <= 0:
            raise ValueError("peak must be positive")
        object.__setattr__(self, "pixels", _frozen(arr))

    @classmethod
    def from_vector(cls, samples: Sequence[float], width: int, height: int,
                    peak: float = DEFAULT_PEAK) -> "Signal":
        flat = np.asarray(samples, dtype=np.float64)
        if flat.ndim != 1 or flat.size != width * height:
            raise DimensionError(
                f"expected {width * height} samples for {width}x{height}, got {flat.size}")
        return cls(flat.reshape(height, width), peak)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    @property
    def size(self) -> int:
        return self.pixels.size

    @property
    def samples(self) -> np.ndarray:
        """Row-major sample vector of length ``width * height``."""
        return self.pixels.reshape(-1)

    def like(self, pixels: np.ndarray) -> "Signal":
        """New signal with the same peak value."""
        return Signal(pixels, self.peak)


class BoundaryMode(str, Enum):
    PERIODIC = "periodic"
    SYMMETRIC = "symmetric"


@dataclass(frozen=True, eq=False)
class BlurOperator:
    """Shift-invariant linear operator given by a centered convolution kernel."""

    kernel: np.ndarray
    boundary_mode: BoundaryMode = BoundaryMode.PERIODIC

    def __post_init__(self) -> None:
        k = np.array(self.kernel, dtype=np.float64)
        if k.ndim != 2:
            raise ValueError("kernel must be 2-D")
        if k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
            raise ValueError(f"kernel dimensions must be odd, got {k.shape}")
        if not np.all(np.isfinite(k)):
            raise ValueError("kernel entries must be finite")
        object.__setattr__(self, "kernel", _frozen(k))
        object.__setattr__(self, "boundary_mode", BoundaryMode(self.boundary_mode))

    @classmethod
    def identity(cls, boundary_mode: BoundaryMode = BoundaryMode.PERIODIC) -> "BlurOperator":
        return cls(np.ones((1, 1)), boundary_mode)

    @property
    def radius(self) -> tuple[int, int]:
        return self.kernel.shape[0] // 2, self.kernel.shape[1] // 2

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BlurOperator):
            return NotImplemented
        return (self.boundary_mode == other.boundary_mode
                and self.kernel.shape == other.kernel.shape
                and bool(np.array_equal(self.kernel, other.kernel)))

    def __hash__(self) -> int:
        return hash((self.boundary_mode, self.kernel.shape, self.kernel.tobytes()))


@dataclass(frozen=True)
class DegradationEnsemble:
    """The displays of the network: operators paired with usage probabilities."""

    entries: tuple[tuple[BlurOperator, float], ...]

    def __post_init__(self) -> None:
        entries = tuple((op, float(p)) for op, p in self.entries)
        if not entries:
            raise ValueError("ensemble needs at least one operator")
        probs = [p for _, p in entries]
        if any(p < 0 or p > 1 or math.isnan(p) for p in probs):
            raise ValueError(f"probabilities must lie in [0, 1], got {probs}")
        if abs(math.fsum(probs) - 1.0) > PROBABILITY_TOLERANCE:
            raise ValueError(f"probabilities must sum to 1, got {math.fsum(probs)!r}")
        modes = {op.boundary_mode for op, _ in entries}
        if len(modes) != 1:
            raise ValueError("all operators must share one boundary mode")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def single(cls, op: BlurOperator) -> "DegradationEnsemble":
        return cls(((op, 1.0),))

    @classmethod
    def identity(cls, boundary_mode: BoundaryMode = BoundaryMode.PERIODIC) -> "DegradationEnsemble":
        return cls.single(BlurOperator.identity(boundary_mode))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[tuple[BlurOperator, float]]:
        return iter(self.entries)

    @property
    def operators(self) -> list[BlurOperator]:
        return [op for op, _ in self.entries]

    @property
    def probabilities(self) -> list[float]:
        return [p for _, p in self.entries]

    @property
    def boundary_mode(self) -> BoundaryMode:
        return self.entries[0][0].boundary_mode

    def most_probable(self) -> "DegradationEnsemble":
        """Reduced ensemble holding only the highest-probability operator.

        Ties go to the lowest index.
        """
        probs = self.probabilities
        best = probs.index(max(probs))
        return DegradationEnsemble.single(self.entries[best][0])


@dataclass(frozen=True)
class Bitstream:
    """Compressed data with its exact number of meaningful bits."""

    data: bytes
    bit_length: int = field(default=-1)

    def __post_init__(self) -> None:
        data = bytes(self.data)
        bits = 8 * len(data) if self.bit_length < 0 else int(self.bit_length)
        if not (8 * (len(data) - 1) < bits <= 8 * len(data)):
            raise ValueError(f"bit_length {bits} inconsistent with {len(data)} bytes")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "bit_length", bits)

    def __len__(self) -> int:
        return len(self.data)


def _check_same_shape(x: Signal, v: Signal) -> None:
    if x.shape != v.shape:
        raise DimensionError(f"signal shapes differ: {x.shape} vs {v.shape}")


def expected_distortion(x: Signal, v: Signal, ensemble: DegradationEnsemble) -> float:
    """Probability-weighted MSE between ``x`` and every degraded rendering of ``v``.

    Computes ``(1/N) * sum_k p_k * ||x - H_k v||^2``.
    """
    from multirecon.operators import apply

    _check_same_shape(x, v)
    total = 0.0
    for op, p in ensemble:
        if p == 0.0:
            continue
        diff = x.pixels - apply(op, v).pixels
        total += p * float(np.dot(diff.ravel(), diff.ravel()))
    return max(total, 0.0) / x.size


def psnr_from_mse(mse: float, peak: float = DEFAULT_PEAK) -> float:
    """``10 log10(peak^2 / mse)``; returns ``inf`` when ``mse`` is zero."""
    if mse < 0:
        raise ValueError("mse must be non-negative")
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def expected_psnr(x: Signal, v: Signal, ensemble: DegradationEnsemble) -> float:
    """PSNR built on the expected distortion, using the source's peak value.

    Zero distortion yields ``math.inf``.
    """
    return psnr_from_mse(expected_distortion(x, v, ensemble), x.peak)
