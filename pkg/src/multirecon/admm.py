"""Network-optimized compression: ADMM alternating a standard codec with deconvolution.

Each iteration runs

    z_tilde = z_hat - u
    b       = compress(z_tilde, theta);  v_hat = decompress(b)
    v_tilde = v_hat + u
    z_hat   = argmin_z sum_k p_k ||x - H_k z||^2 + beta_tilde ||z - v_tilde||^2
    u       = u + (v_hat - z_hat)

starting from ``z_hat = x`` and ``u = 0``. Only ``v_hat`` passes through
the codec's quantization; ``u``, ``z_tilde`` and ``v_tilde`` stay in full
floating point precision.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from multirecon.codec.base import Codec
from multirecon.codec.reference import quant_step
from multirecon.core import Bitstream, DegradationEnsemble, Signal, psnr_from_mse
from multirecon.solver import ZUpdateContext, z_update

log = logging.getLogger(__name__)

# Calibrated on the bundled corpus; see beta_tilde_schedule.
DEFAULT_BETA_SCALE = 0.05

CONTINUE = "continue"
CONVERGED = "converged"
DIVERGED = "diverged"
MAX_ITER = "max_iter"


def beta_tilde_schedule(theta: int, scale: float = DEFAULT_BETA_SCALE) -> float:
    """Default proximity weight for quality index ``theta``.

    Proportional to the squared quantizer step, ``scale * 2**((theta - 4) / 3)``.
    """
    return scale * quant_step(theta) ** 2


@dataclass(frozen=True)
class AdmmConfig:
    theta: int
    beta_tilde: Optional[float] = None
    max_iterations: int = 40
    convergence_epsilon: float = 1e-3
    divergence_factor: float = 2.0
    beta_scale: float = DEFAULT_BETA_SCALE
    early_stop: bool = True

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.convergence_epsilon > 0:
            raise ValueError("convergence_epsilon must be positive")
        if not self.divergence_factor > 1:
            raise ValueError("divergence_factor must exceed 1")
        if self.beta_tilde is not None and not self.beta_tilde > 0:
            raise ValueError("beta_tilde must be positive")

    @property
    def effective_beta_tilde(self) -> float:
        if self.beta_tilde is not None:
            return float(self.beta_tilde)
        return beta_tilde_schedule(self.theta, self.beta_scale)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    split_residual: float
    z_norm: float
    bits: int
    expected_mse: float
    peak: float = 255.0

    @property
    def relative_residual(self) -> float:
        return self.split_residual / max(self.z_norm, np.finfo(float).eps)

    @property
    def expected_psnr_db(self) -> float:
        return psnr_from_mse(self.expected_mse, self.peak)


@dataclass
class AdmmTrace:
    """Per-iteration diagnostics of one encode."""

    records: list[IterationRecord] = field(default_factory=list)
    termination: Optional[str] = None
    returned_iteration: Optional[int] = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def residuals(self) -> list[float]:
        return [r.split_residual for r in self.records]

    def finish(self, reason: str, returned_iteration: int) -> None:
        if self.termination is not None:
            raise RuntimeError("termination reason already set")
        self.termination = reason
        self.returned_iteration = returned_iteration

    def returned_record(self) -> IterationRecord:
        if self.returned_iteration is None:
            raise RuntimeError("trace is not finished")
        return self.records[self.returned_iteration - 1]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "split_residual", "bits", "expected_mse", "expected_psnr_db"])
            for r in self.records:
                writer.writerow([r.iteration, repr(r.split_residual), r.bits,
                                 repr(r.expected_mse), repr(r.expected_psnr_db)])


class AdmmError(RuntimeError):
    """Codec or solver failure inside the loop; carries the trace so far."""

    def __init__(self, message: str, trace: AdmmTrace):
        super().__init__(message)
        self.trace = trace


def termination_check(trace: AdmmTrace, cfg: AdmmConfig) -> str:
    """Decide whether the loop should stop after the latest recorded iteration.

    Converged when the split residual relative to ``||z_hat||`` drops below
    ``convergence_epsilon``. Diverged when the residual grows by more than
    ``divergence_factor`` over the previous iteration and also exceeds the
    first iteration's residual.
    """
    if not trace.records:
        raise ValueError("termination check needs at least one iteration")
    current = trace.records[-1]
    if current.relative_residual < cfg.convergence_epsilon:
        return CONVERGED
    if len(trace.records) >= 2:
        previous = trace.records[-2].split_residual
        first = trace.records[0].split_residual
        if (current.split_residual > cfg.divergence_factor * previous
                and current.split_residual > first):
            return DIVERGED
    return CONTINUE


def encode_for_network(x: Signal, ensemble: DegradationEnsemble, codec: Codec,
                       cfg: AdmmConfig,
                       context: Optional[ZUpdateContext] = None) -> tuple[Bitstream, AdmmTrace]:
    """Compress ``x`` so that its degraded renderings best match ``x`` on average.

    Returns the bitstream of the last accepted iteration and the trace. When
    divergence is detected the stream from the iteration before the
    divergent one is returned. ``context`` may be passed to share the
    source-dependent precomputation between encodes with the same
    ``(x, ensemble, beta_tilde)``.
    """
    beta = cfg.effective_beta_tilde
    ctx = context if context is not None else ZUpdateContext(ensemble, beta, x)
    if ctx.beta_tilde != beta or ctx.x is not x and not np.array_equal(ctx.x.pixels, x.pixels):
        raise ValueError("shared context does not match the encode inputs")

    trace = AdmmTrace()
    z_hat = x.pixels
    u = np.zeros(x.shape)
    streams: list[Bitstream] = []
    for t in range(1, cfg.max_iterations + 1):
        z_tilde = x.like(z_hat - u)
        try:
            b = codec.compress(z_tilde, cfg.theta)
            v_hat = codec.decompress(b).pixels
        except Exception as exc:
            raise AdmmError(f"codec failed at iteration {t}: {exc}", trace) from exc
        if v_hat.shape != x.shape:
            raise AdmmError(f"codec changed dimensions at iteration {t}", trace)
        v_tilde = x.like(v_hat + u)
        try:
            z_hat = z_update(ctx, v_tilde).pixels
        except Exception as exc:
            raise AdmmError(f"z-update failed at iteration {t}: {exc}", trace) from exc
        split = v_hat - z_hat
        u = u + split

        streams.append(b)
        trace.records.append(IterationRecord(
            iteration=t,
            split_residual=float(np.linalg.norm(split)),
            z_norm=float(np.linalg.norm(z_hat)),
            bits=codec.rate_of(b),
            expected_mse=ctx.distortion(x.like(v_hat)),
            peak=x.peak,
        ))
        log.debug("iter %d residual %.4g bits %d mse %.4g", t, trace.records[-1].split_residual,
                  trace.records[-1].bits, trace.records[-1].expected_mse)
        if not cfg.early_stop:
            continue
        state = termination_check(trace, cfg)
        if state == CONVERGED:
            trace.finish(CONVERGED, t)
            return b, trace
        if state == DIVERGED:
            trace.finish(DIVERGED, t - 1)
            return streams[-2], trace
    trace.finish(MAX_ITER, cfg.max_iterations)
    return streams[-1], trace
