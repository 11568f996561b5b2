"""Closed-form and iterative solvers for the multi-operator l2 deconvolution step.

The z-update minimizes

    sum_k p_k ||x - H_k z||^2 + beta_tilde ||z - v_tilde||^2

whose normal equations are

    (sum_k p_k H_k^T H_k + beta_tilde I) z = sum_k p_k H_k^T x + beta_tilde v_tilde.

For periodic boundaries every H_k is diagonalized by the 2-D DFT and the
system is solved pointwise in the frequency domain. Other boundaries (and
the test suite) use conjugate gradients on the spatial operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from multirecon.core import (
    BlurOperator,
    BoundaryMode,
    DegradationEnsemble,
    DimensionError,
    Signal,
)
from multirecon.operators import convolve_array, correlate_array, transfer_function

LAPLACIAN = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])


class SolverError(RuntimeError):
    """Iterative solve did not reach the requested tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (relative residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class _Spectral:
    transfers: tuple[np.ndarray, ...]
    system: np.ndarray       # sum_k p_k |H_k|^2 + beta_tilde
    rhs_source: np.ndarray   # sum_k p_k conj(H_k) * fft2(x)
    source_hat: np.ndarray   # fft2(x)


@dataclass(frozen=True)
class ZUpdateContext:
    """Everything the z-update needs that stays fixed over an encode."""

    ensemble: DegradationEnsemble
    beta_tilde: float
    x: Signal
    precomputed: Optional[_Spectral] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.beta_tilde > 0:
            raise ValueError(f"beta_tilde must be positive, got {self.beta_tilde}")
        object.__setattr__(self, "beta_tilde", float(self.beta_tilde))
        if self.ensemble.boundary_mode is BoundaryMode.PERIODIC:
            object.__setattr__(self, "precomputed", self._spectral())

    def _spectral(self) -> _Spectral:
        h, w = self.x.shape
        transfers = tuple(transfer_function(op, w, h) for op in self.ensemble.operators)
        x_hat = np.fft.fft2(self.x.pixels)
        system = np.full((h, w), self.beta_tilde)
        rhs = np.zeros((h, w), dtype=np.complex128)
        for t, p in zip(transfers, self.ensemble.probabilities):
            system += p * (t.real ** 2 + t.imag ** 2)
            rhs += p * np.conj(t) * x_hat
        return _Spectral(transfers, system, rhs, x_hat)

    @property
    def is_spectral(self) -> bool:
        return self.precomputed is not None

    def distortion(self, v: Signal) -> float:
        """Expected distortion of ``v`` against the held source, via Parseval when possible."""
        if v.shape != self.x.shape:
            raise DimensionError(f"signal shapes differ: {self.x.shape} vs {v.shape}")
        if self.precomputed is None:
            from multirecon.core import expected_distortion
            return expected_distortion(self.x, v, self.ensemble)
        pre = self.precomputed
        v_hat = np.fft.fft2(v.pixels)
        total = 0.0
        for t, p in zip(pre.transfers, self.ensemble.probabilities):
            diff = pre.source_hat - t * v_hat
            total += p * float(np.sum(diff.real ** 2 + diff.imag ** 2))
        return total / (v.size * v.size)


def system_apply(ensemble: DegradationEnsemble, beta_tilde: float, z: np.ndarray) -> np.ndarray:
    """``(sum_k p_k H_k^T H_k + beta_tilde I) z`` using spatial convolutions."""
    out = beta_tilde * z
    for op, p in ensemble:
        out = out + p * correlate_array(op, convolve_array(op, z))
    return out


def _source_term(ensemble: DegradationEnsemble, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for op, p in ensemble:
        out += p * correlate_array(op, x)
    return out


def right_hand_side(ctx: ZUpdateContext, v_tilde: Signal) -> np.ndarray:
    return _source_term(ctx.ensemble, ctx.x.pixels) + ctx.beta_tilde * v_tilde.pixels


def _check(ctx: ZUpdateContext, v_tilde: Signal) -> None:
    if v_tilde.shape != ctx.x.shape:
        raise DimensionError(f"v_tilde shape {v_tilde.shape} does not match x {ctx.x.shape}")


def z_update(ctx: ZUpdateContext, v_tilde: Signal) -> Signal:
    """Exact minimizer of the deconvolution subproblem.

    Periodic ensembles are solved in the DFT domain; anything else falls
    back to :func:`iterative_z_update` at a tight tolerance.
    """
    _check(ctx, v_tilde)
    if ctx.precomputed is None:
        return iterative_z_update(ctx, v_tilde, tol=1e-10, max_iter=10_000)
    pre = ctx.precomputed
    rhs = pre.rhs_source + ctx.beta_tilde * np.fft.fft2(v_tilde.pixels)
    return v_tilde.like(np.fft.ifft2(rhs / pre.system).real)


def z_update_homogeneous(ctx: ZUpdateContext, v_tilde: Signal) -> Signal:
    """The part of the z-update that is linear in ``v_tilde`` (source term dropped)."""
    _check(ctx, v_tilde)
    if ctx.precomputed is None:
        zero_src = ZUpdateContext(ctx.ensemble, ctx.beta_tilde, ctx.x.like(np.zeros(ctx.x.shape)))
        return iterative_z_update(zero_src, v_tilde, tol=1e-10, max_iter=10_000)
    rhs = ctx.beta_tilde * np.fft.fft2(v_tilde.pixels)
    return v_tilde.like(np.fft.ifft2(rhs / ctx.precomputed.system).real)


def conjugate_gradient(apply_a: Callable[[np.ndarray], np.ndarray], b: np.ndarray,
                       tol: float, max_iter: int,
                       x0: Optional[np.ndarray] = None) -> tuple[np.ndarray, int]:
    """Plain CG for a symmetric positive definite operator.

    Stops once ``||b - A x|| <= tol * ||b||``. Raises :class:`SolverError`
    when ``max_iter`` is exhausted first.
    """
    b_norm = float(np.linalg.norm(b))
    x = np.zeros_like(b) if x0 is None else x0.copy()
    if b_norm == 0.0 and x0 is None:
        return x, 0
    r = b - apply_a(x)
    rr = float(np.vdot(r, r))
    threshold = tol * b_norm
    if np.sqrt(rr) <= threshold:
        return x, 0
    d = r.copy()
    for it in range(1, max_iter + 1):
        ad = apply_a(d)
        alpha = rr / float(np.vdot(d, ad))
        x += alpha * d
        r -= alpha * ad
        rr_new = float(np.vdot(r, r))
        if np.sqrt(rr_new) <= threshold:
            return x, it
        d = r + (rr_new / rr) * d
        rr = rr_new
    raise SolverError("conjugate gradient did not converge", np.sqrt(rr) / b_norm, max_iter)


def iterative_z_update(ctx: ZUpdateContext, v_tilde: Signal, tol: float = 1e-10,
                       max_iter: int = 1000) -> Signal:
    """Conjugate-gradient solve of the z-update normal equations.

    Uses only spatial convolutions, so it doubles as an independent check
    of the frequency-domain path.
    """
    _check(ctx, v_tilde)
    b = right_hand_side(ctx, v_tilde)
    z, _ = conjugate_gradient(lambda z: system_apply(ctx.ensemble, ctx.beta_tilde, z),
                              b, tol, max_iter)
    return v_tilde.like(z)


def tikhonov_deconvolve(x: Signal, ensemble: DegradationEnsemble, reg_weight: float,
                        tol: float = 1e-10, max_iter: int = 5000) -> Signal:
    """Solve ``min_w sum_k p_k ||x - H_k w||^2 + reg_weight ||L w||^2``.

    ``L`` is the 5-point discrete Laplacian sharing the ensemble's boundary
    mode. The DC component is unpenalized, so the solution keeps the mean
    of ``x`` whenever every kernel has unit sum.
    """
    if not reg_weight > 0:
        raise ValueError(f"reg_weight must be positive, got {reg_weight}")
    lap = BlurOperator(LAPLACIAN, ensemble.boundary_mode)
    if ensemble.boundary_mode is BoundaryMode.PERIODIC:
        h, w = x.shape
        lap_t = transfer_function(lap, w, h)
        x_hat = np.fft.fft2(x.pixels)
        system = reg_weight * (lap_t.real ** 2 + lap_t.imag ** 2)
        rhs = np.zeros(x.shape, dtype=np.complex128)
        for op, p in ensemble:
            t = transfer_function(op, w, h)
            system = system + p * (t.real ** 2 + t.imag ** 2)
            rhs += p * np.conj(t) * x_hat
        return x.like(np.fft.ifft2(rhs / system).real)

    def normal(z: np.ndarray) -> np.ndarray:
        out = reg_weight * correlate_array(lap, convolve_array(lap, z))
        return out + system_apply(ensemble, 0.0, z)

    w_arr, _ = conjugate_gradient(normal, _source_term(ensemble, x.pixels), tol, max_iter)
    return x.like(w_arr)
