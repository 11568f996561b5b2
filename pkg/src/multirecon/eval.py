"""Rate sweeps, PSNR-bitrate curves and Bjontegaard-delta PSNR."""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from multirecon.codec.base import Codec
from multirecon.core import Bitstream, DegradationEnsemble, Signal, expected_psnr
from multirecon.pgm import atomic_write

log = logging.getLogger(__name__)

SWEEP_QPS = (1, 6, 11, 16, 21, 26, 31, 36, 41)
HIGH_RATE_QPS = (1, 6, 11, 16)
MIN_BD_POINTS = 4

Method = Callable[[Signal, DegradationEnsemble, Codec, int], Bitstream]


class CurveError(ValueError):
    pass


@dataclass(frozen=True)
class RatePoint:
    rate: float   # bits per pixel
    psnr: float   # dB
    qp: Optional[int] = None


@dataclass
class RdCurve:
    """PSNR-bitrate samples of one method, kept sorted by rate."""

    points: list[RatePoint]
    label: str = ""
    failures: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.points = sorted(self.points, key=lambda p: (p.rate, p.psnr))

    @classmethod
    def from_arrays(cls, rates: Sequence[float], psnrs: Sequence[float], label: str = "",
                    qps: Optional[Sequence[int]] = None) -> "RdCurve":
        qps = list(qps) if qps is not None else [None] * len(rates)
        return cls([RatePoint(float(r), float(p), q) for r, p, q in zip(rates, psnrs, qps)], label)

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])

    @property
    def psnrs(self) -> np.ndarray:
        return np.array([p.psnr for p in self.points])

    def subset(self, qps: Iterable[int]) -> "RdCurve":
        keep = set(qps)
        return RdCurve([p for p in self.points if p.qp in keep], self.label)

    def validate(self) -> None:
        if len(self.points) < MIN_BD_POINTS:
            raise CurveError(f"curve '{self.label}' has {len(self.points)} points; "
                             f"BD-PSNR needs {MIN_BD_POINTS}")
        if not all(math.isfinite(p.psnr) and p.rate > 0 for p in self.points):
            raise CurveError(f"curve '{self.label}' has non-finite PSNR or non-positive rate")
        if np.any(np.diff(self.rates) <= 0):
            raise CurveError(f"curve '{self.label}' rates are not strictly increasing")


def _fit(curve: RdCurve) -> np.polynomial.Polynomial:
    curve.validate()
    log_rates = np.log10(curve.rates)
    span = log_rates[-1] - log_rates[0]
    if np.min(np.diff(log_rates)) < 1e-6 * max(span, 1e-12):
        raise CurveError(f"curve '{curve.label}' has near-duplicate rates; cubic fit ill-conditioned")
    with warnings.catch_warnings():
        warnings.simplefilter("error", np.exceptions.RankWarning)
        try:
            coeffs = np.polyfit(log_rates, curve.psnrs, 3)
        except np.exceptions.RankWarning as exc:
            raise CurveError(f"ill-conditioned cubic fit for '{curve.label}'") from exc
    return np.polynomial.Polynomial(coeffs[::-1])


def bd_psnr(reference: RdCurve, test: RdCurve,
            rate_range: Optional[tuple[float, float]] = None) -> float:
    """Average PSNR gap (test minus reference) between cubic fits in log10 rate.

    Integrates over the overlap of the two curves' log-rate spans unless
    ``rate_range`` (in bits per pixel) is supplied.
    """
    p_ref = _fit(reference)
    p_test = _fit(test)
    if rate_range is None:
        lo = max(np.log10(reference.rates[0]), np.log10(test.rates[0]))
        hi = min(np.log10(reference.rates[-1]), np.log10(test.rates[-1]))
    else:
        lo, hi = np.log10(rate_range[0]), np.log10(rate_range[1])
    if not hi > lo:
        raise CurveError("curves have no overlapping rate range")
    antiderivative = (p_test - p_ref).integ()
    return float((antiderivative(hi) - antiderivative(lo)) / (hi - lo))


def sweep(x: Signal, ensemble: DegradationEnsemble, method: Method, codec: Codec,
          qp_list: Sequence[int], label: str = "", min_points: int = MIN_BD_POINTS) -> RdCurve:
    """Run ``method`` at every QP and measure (bpp, expected PSNR) on the full ensemble.

    Failed points are logged, recorded in ``curve.failures`` and skipped.
    """
    if not qp_list:
        raise ValueError("qp_list is empty")
    lo, hi = codec.theta_range
    points, failures = [], {}
    for qp in qp_list:
        if not lo <= qp <= hi:
            raise ValueError(f"QP {qp} outside codec range [{lo}, {hi}]")
        try:
            b = method(x, ensemble, codec, qp)
            v = codec.decompress(b)
            points.append(RatePoint(codec.rate_of(b) / x.size, expected_psnr(x, v, ensemble), qp))
        except Exception as exc:  # one bad point must not sink the curve
            log.warning("%s failed at QP %d: %s", label or "method", qp, exc)
            failures[qp] = str(exc)
    curve = RdCurve(points, label, failures)
    if len(points) < min_points:
        raise CurveError(f"only {len(points)} of {len(qp_list)} points survived for '{label}'")
    return curve


def _write_rows(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write(path, buf.getvalue().encode())


def write_curves_csv(path: str | Path, curves: Iterable[RdCurve]) -> None:
    _write_rows(path, ["method", "qp", "bpp", "psnr_db"], (
        [curve.label, "" if p.qp is None else p.qp, repr(p.rate), repr(p.psnr)]
        for curve in curves
        for p in sorted(curve.points, key=lambda p: (p.qp is None, p.qp, p.rate))))


def read_curves_csv(path: str | Path) -> dict[str, RdCurve]:
    rows: dict[str, list[RatePoint]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            qp = int(row["qp"]) if row["qp"] else None
            rows.setdefault(row["method"], []).append(
                RatePoint(float(row["bpp"]), float(row["psnr_db"]), qp))
    return {label: RdCurve(pts, label) for label, pts in rows.items()}


METHOD_NAMES = ("proposed", "regular", "single", "predeconv")
REPORT_COLUMNS = ("image", "gain_vs_regular", "gain_vs_predeconv", "gain_vs_single")


def make_method(name: str, beta_tilde: Optional[float] = None, beta_scale: Optional[float] = None,
                max_iterations: int = 40, reg_weights: Optional[Sequence[float]] = None) -> Method:
    """Build a sweepable ``(x, ensemble, codec, qp) -> Bitstream`` callable by name."""
    from multirecon import admm, baselines

    def cfg(qp: int) -> "admm.AdmmConfig":
        extra = {} if beta_scale is None else {"beta_scale": beta_scale}
        return admm.AdmmConfig(qp, beta_tilde=beta_tilde, max_iterations=max_iterations, **extra)

    if name == "proposed":
        return lambda x, ens, codec, qp: admm.encode_for_network(x, ens, codec, cfg(qp))[0]
    if name == "single":
        return lambda x, ens, codec, qp: baselines.single_display_encode(x, ens, codec, cfg(qp))
    if name == "regular":
        return lambda x, ens, codec, qp: baselines.regular_encode(x, codec, qp)
    if name == "predeconv":
        weights = tuple(reg_weights) if reg_weights is not None else baselines.PREDECONV_WEIGHTS
        return lambda x, ens, codec, qp: baselines.best_predeconv_encode(x, ens, codec, qp, weights)[0]
    raise ValueError(f"unknown method '{name}'; expected one of {', '.join(METHOD_NAMES)}")


@dataclass
class ReportRow:
    image: str
    gain_vs_regular: Optional[float] = None
    gain_vs_predeconv: Optional[float] = None
    gain_vs_single: Optional[float] = None
    curves: dict = field(default_factory=dict, repr=False)
    errors: dict = field(default_factory=dict)

    def cells(self) -> list[str]:
        gains = (self.gain_vs_regular, self.gain_vs_predeconv, self.gain_vs_single)
        return [self.image] + ["" if g is None else repr(g) for g in gains]


def high_rate_report(x_list: Sequence[Signal], ensemble: DegradationEnsemble, codec: Codec,
                     names: Optional[Sequence[str]] = None, qps: Sequence[int] = HIGH_RATE_QPS,
                     methods: Optional[dict[str, Method]] = None) -> list[ReportRow]:
    """BD-PSNR gains of the proposed encoder over each baseline, one row per image.

    A failing sweep or BD computation leaves the affected cells empty and
    records the reason in ``row.errors``.
    """
    if not x_list:
        raise ValueError("corpus is empty")
    names = list(names) if names is not None else [f"image{i + 1:02d}" for i in range(len(x_list))]
    if len(names) != len(x_list):
        raise ValueError("names and images differ in length")
    methods = methods or {m: make_method(m) for m in METHOD_NAMES}
    rows = []
    for name, x in zip(names, x_list):
        row = ReportRow(name)
        for label, method in methods.items():
            try:
                row.curves[label] = sweep(x, ensemble, method, codec, qps, label)
            except Exception as exc:
                log.warning("%s: sweep of %s failed: %s", name, label, exc)
                row.errors[label] = str(exc)
        for column, baseline in (("gain_vs_regular", "regular"), ("gain_vs_predeconv", "predeconv"),
                                 ("gain_vs_single", "single")):
            if "proposed" not in row.curves or baseline not in row.curves:
                continue
            try:
                setattr(row, column, bd_psnr(row.curves[baseline], row.curves["proposed"]))
            except CurveError as exc:
                row.errors[column] = str(exc)
        rows.append(row)
    return rows


def write_report_csv(path: str | Path, rows: Iterable[ReportRow]) -> None:
    _write_rows(path, REPORT_COLUMNS, (row.cells() for row in rows))


def read_report_csv(path: str | Path) -> list[ReportRow]:
    def cell(s: str) -> Optional[float]:
        return float(s) if s else None

    with open(path, newline="") as fh:
        return [ReportRow(r["image"], cell(r["gain_vs_regular"]), cell(r["gain_vs_predeconv"]),
                          cell(r["gain_vs_single"])) for r in csv.DictReader(fh)]
