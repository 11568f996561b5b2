"""INI-style configuration: the degradation ensemble and an optional external codec.

Example::

    [ensemble]
    boundary = periodic

    [display.1]
    sigma = 0.6
    size = 15
    probability = 0.6

    [display.2]
    kernel = kernels/measured.txt   ; relative to this file
    probability = 0.4

    [external_codec]
    encoder = bpgenc -q {qp} -o {output} {input}
    decoder = bpgdec -o {output} {input}
    image_suffix = .png
    timeout = 60

Display sections are ordered by their numeric suffix.
"""

from __future__ import annotations

import configparser
import re
from pathlib import Path
from typing import Optional

from multirecon.codec.external import ExternalCodecConfig
from multirecon.core import BlurOperator, BoundaryMode, DegradationEnsemble
from multirecon.operators import gaussian_blur, load_kernel

_DISPLAY = re.compile(r"^display\.(\d+)$")


class ConfigError(ValueError):
    pass


def _read(path: str | Path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parser


def _number(section: configparser.SectionProxy, key: str, kind=float):
    try:
        return kind(section[key])
    except KeyError:
        raise ConfigError(f"[{section.name}] is missing '{key}'") from None
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {section[key]!r} is not a valid {kind.__name__}") from None


def parse_ensemble(parser: configparser.ConfigParser, base_dir: Path) -> DegradationEnsemble:
    try:
        boundary = BoundaryMode(parser.get("ensemble", "boundary", fallback="periodic").strip())
    except ValueError as exc:
        raise ConfigError(f"[ensemble] boundary: {exc}") from None

    displays = sorted((int(m.group(1)), name) for name in parser.sections()
                      if (m := _DISPLAY.match(name)))
    if not displays:
        raise ConfigError("no [display.N] sections")
    entries = []
    for _, name in displays:
        sec = parser[name]
        prob = _number(sec, "probability")
        has_sigma, has_kernel = "sigma" in sec, "kernel" in sec
        if has_sigma == has_kernel:
            raise ConfigError(f"[{name}] needs exactly one of 'sigma' or 'kernel'")
        if has_sigma:
            size = _number(sec, "size", int) if "size" in sec else 15
            try:
                op = gaussian_blur(size, _number(sec, "sigma"), boundary)
            except ValueError as exc:
                raise ConfigError(f"[{name}] {exc}") from None
        else:
            path = base_dir / sec["kernel"].strip()
            try:
                kernel = load_kernel(path)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"[{name}] cannot load kernel {path}: {exc}") from None
            if "size" in sec and kernel.shape != (_number(sec, "size", int),) * 2:
                raise ConfigError(f"[{name}] kernel {path} has shape {kernel.shape}, size says {sec['size']}")
            op = BlurOperator(kernel, boundary)
        entries.append((op, prob))
    try:
        return DegradationEnsemble(tuple(entries))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_external_codec(parser: configparser.ConfigParser) -> Optional[ExternalCodecConfig]:
    if not parser.has_section("external_codec"):
        return None
    sec = parser["external_codec"]
    for key in ("encoder", "decoder"):
        if key not in sec:
            raise ConfigError(f"[external_codec] is missing '{key}'")
    kwargs = {"encoder": sec["encoder"], "decoder": sec["decoder"]}
    if "timeout" in sec:
        kwargs["timeout"] = _number(sec, "timeout")
    for key in ("image_suffix", "stream_suffix", "name"):
        if key in sec:
            kwargs[key] = sec[key].strip()
    for key in ("theta_min", "theta_max"):
        if key in sec:
            kwargs[key] = _number(sec, key, int)
    return ExternalCodecConfig(**kwargs)


def load_ensemble(path: str | Path) -> DegradationEnsemble:
    return parse_ensemble(_read(path), Path(path).parent)


def load_config(path: str | Path) -> tuple[DegradationEnsemble, Optional[ExternalCodecConfig]]:
    parser = _read(path)
    return parse_ensemble(parser, Path(path).parent), parse_external_codec(parser)
