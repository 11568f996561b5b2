"""Command-line entry point: ``multirecon {encode,decode,sweep,report}``.

Result lines on standard output are single-line ``key=value`` pairs
separated by spaces. Exit status: 0 success, 2 bad arguments or
configuration, 3 I/O or bitstream parse failure, 4 solver or codec failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from multirecon import __version__
from multirecon.admm import AdmmConfig, AdmmError, encode_for_network
from multirecon.baselines import best_predeconv_encode, regular_encode, single_display_encode
from multirecon.codec import BitstreamError, Codec, ReferenceCodec
from multirecon.codec.external import CodecConfigError, ExternalCodec, ExternalCodecError
from multirecon.codec.reference import read_bitstream
from multirecon.config import ConfigError, load_config
from multirecon.core import Bitstream, DegradationEnsemble, DimensionError, expected_psnr
from multirecon.eval import (
    HIGH_RATE_QPS,
    METHOD_NAMES,
    SWEEP_QPS,
    CurveError,
    high_rate_report,
    make_method,
    sweep,
    write_curves_csv,
    write_report_csv,
)
from multirecon.operators import apply
from multirecon.pgm import PgmError, atomic_write, read_pgm, write_pgm
from multirecon.solver import SolverError

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_FAILURE = 0, 2, 3, 4

log = logging.getLogger("multirecon")


class UsageError(Exception):
    pass


def _beta(text: str) -> Optional[float]:
    if text == "auto":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number or 'auto', got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("beta-tilde must be positive")
    return value


def _qps(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("QP list is empty")
    return values


def _methods(text: str) -> list[str]:
    names = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in METHOD_NAMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from {', '.join(METHOD_NAMES)}")
    return names


def _emit(**fields) -> None:
    def fmt(v):
        return f"{v:.6f}" if isinstance(v, float) else str(v)
    print(" ".join(f"{k}={fmt(v)}" for k, v in fields.items()), flush=True)


def _setup(args) -> tuple[Optional[DegradationEnsemble], Codec]:
    ensemble, external = None, None
    if getattr(args, "ensemble", None):
        if not Path(args.ensemble).is_file():
            raise OSError(f"ensemble config not found: {args.ensemble}")
        ensemble, external = load_config(args.ensemble)
    if getattr(args, "codec", "reference") == "external":
        if external is None:
            raise UsageError("--codec external needs an [external_codec] section in the --ensemble config")
        return ensemble, ExternalCodec(external)
    return ensemble, ReferenceCodec()


def _check_qp(codec: Codec, qp: int) -> None:
    lo, hi = codec.theta_range
    if not lo <= qp <= hi:
        raise UsageError(f"--qp {qp} outside the codec range [{lo}, {hi}]")


def cmd_encode(args) -> int:
    ensemble, codec = _setup(args)
    _check_qp(codec, args.qp)
    x = read_pgm(args.input)
    cfg = AdmmConfig(args.qp, beta_tilde=args.beta_tilde, max_iterations=args.max_iters)
    trace = None
    extra = {}
    if args.method == "proposed":
        b, trace = encode_for_network(x, ensemble, codec, cfg)
        extra = {"iterations": len(trace), "termination": trace.termination,
                 "beta_tilde": cfg.effective_beta_tilde}
    elif args.method == "single":
        b = single_display_encode(x, ensemble, codec, cfg)
    elif args.method == "predeconv":
        b, mu = best_predeconv_encode(x, ensemble, codec, args.qp)
        extra = {"reg_weight": f"{mu:g}"}
    else:
        b = regular_encode(x, codec, args.qp)
    if args.trace:
        if trace is None:
            raise UsageError("--trace is only available with --method proposed")
        trace.to_csv(args.trace)
    atomic_write(args.output, b.data)
    v = codec.decompress(b)
    _emit(method=args.method, qp=args.qp, bits=codec.rate_of(b), bpp=codec.rate_of(b) / x.size,
          expected_psnr_db=expected_psnr(x, v, ensemble), **extra)
    return EXIT_OK


def cmd_decode(args) -> int:
    ensemble, codec = _setup(args)
    data = Path(args.input).read_bytes()
    b = read_bitstream(data) if isinstance(codec, ReferenceCodec) else Bitstream(data)
    v = codec.decompress(b)
    write_pgm(args.output, v)
    fields = {"width": v.width, "height": v.height, "bits": codec.rate_of(b)}
    if args.display is not None:
        if ensemble is None:
            raise UsageError("--display needs --ensemble")
        if not 1 <= args.display <= len(ensemble):
            raise UsageError(f"--display must lie in 1..{len(ensemble)}")
        if not args.display_output:
            raise UsageError("--display needs --display-output")
        shown = apply(ensemble.operators[args.display - 1], v)
        write_pgm(args.display_output, shown)
        fields["display"] = args.display
    _emit(**fields)
    return EXIT_OK


def _corpus(directory: str) -> list[Path]:
    paths = sorted(Path(directory).glob("*.pgm"))
    if not paths:
        raise OSError(f"no .pgm files in {directory}")
    return paths


def _method_table(args) -> dict:
    return {m: make_method(m, beta_tilde=args.beta_tilde, max_iterations=args.max_iters)
            for m in args.methods}


def cmd_sweep(args) -> int:
    ensemble, codec = _setup(args)
    for qp in args.qps:
        _check_qp(codec, qp)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    methods = _method_table(args)
    failed = 0
    for path in _corpus(args.corpus):
        try:
            x = read_pgm(path)
            curves = [sweep(x, ensemble, fn, codec, args.qps, name) for name, fn in methods.items()]
        except (OSError, PgmError, CurveError) as exc:
            log.error("%s: %s", path.name, exc)
            failed += 1
            continue
        write_curves_csv(out / f"{path.stem}_curves.csv", curves)
        if args.plots:
            from multirecon.plotting import plot_rd_curves
            plot_rd_curves(out / f"{path.stem}_rd.svg", curves, path.stem)
        for c in curves:
            _emit(image=path.stem, method=c.label, points=len(c.points), failures=len(c.failures))
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_report(args) -> int:
    ensemble, codec = _setup(args)
    for qp in args.qps:
        _check_qp(codec, qp)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    methods = _method_table(args)
    if "proposed" not in methods:
        raise UsageError("report needs the proposed method")
    rows = []
    for path in _corpus(args.corpus):
        try:
            x = read_pgm(path)
        except (OSError, PgmError) as exc:
            log.error("%s: %s", path.name, exc)
            continue
        row = high_rate_report([x], ensemble, codec, [path.stem], args.qps, methods)[0]
        rows.append(row)
        write_curves_csv(out / f"{path.stem}_curves.csv", row.curves.values())
        if args.plots:
            from multirecon.plotting import plot_rd_curves
            plot_rd_curves(out / f"{path.stem}_rd.svg", row.curves.values(), path.stem)
        cells = dict(zip(("gain_vs_regular", "gain_vs_predeconv", "gain_vs_single"), row.cells()[1:]))
        _emit(image=path.stem, **{k: (f"{float(v):.4f}" if v else "NA") for k, v in cells.items()})
    write_report_csv(out / "report.csv", rows)
    if args.plots and rows:
        from multirecon.plotting import plot_gains
        plot_gains(out / "gains.svg", rows)
    incomplete = sum(1 for r in rows if r.errors)
    return EXIT_FAILURE if incomplete or not rows else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multirecon", description=(
        "Compress images so that they look best after the blur of the displays "
        "that will show them."))
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, ensemble_required=True):
        p.add_argument("--ensemble", required=ensemble_required, help="ensemble config file (INI)")
        p.add_argument("--codec", choices=("reference", "external"), default="reference")

    def tuning(p):
        p.add_argument("--beta-tilde", type=_beta, default=None, metavar="REAL|auto",
                       help="proximity weight; 'auto' (default) follows the QP schedule")
        p.add_argument("--max-iters", type=int, default=40)

    enc = sub.add_parser("encode", help="compress one PGM image")
    enc.add_argument("--input", required=True)
    enc.add_argument("--output", required=True)
    enc.add_argument("--qp", type=int, required=True)
    enc.add_argument("--method", choices=METHOD_NAMES, default="proposed")
    enc.add_argument("--trace", help="write per-iteration diagnostics CSV (proposed only)")
    common(enc)
    tuning(enc)
    enc.set_defaults(func=cmd_encode)

    dec = sub.add_parser("decode", help="decompress a bitstream to PGM")
    dec.add_argument("--input", required=True)
    dec.add_argument("--output", required=True)
    dec.add_argument("--display", type=int, help="also export what display K (1-based) shows")
    dec.add_argument("--display-output")
    common(dec, ensemble_required=False)
    dec.set_defaults(func=cmd_decode)

    for name, qps, fn, text in (("sweep", SWEEP_QPS, cmd_sweep, "PSNR-rate curves for a corpus"),
                                ("report", HIGH_RATE_QPS, cmd_report, "BD-PSNR gain table for a corpus")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--corpus", required=True, help="directory of .pgm images")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--qps", type=_qps, default=list(qps), help="comma-separated QPs")
        p.add_argument("--methods", type=_methods, default=list(METHOD_NAMES))
        p.add_argument("--plots", action="store_true", help="also write SVG charts")
        common(p)
        tuning(p)
        p.set_defaults(func=fn)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "max_iters", 1) < 1:
        parser.error("--max-iters must be at least 1")
    try:
        return args.func(args)
    except (UsageError, ConfigError, CodecConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, PgmError, BitstreamError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AdmmError, SolverError, ExternalCodecError, DimensionError, np.linalg.LinAlgError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
