"""Adapter that drives external encoder/decoder executables through temp files.

Commands are templates with ``{input}``, ``{output}`` and ``{qp}``
placeholders, split with shell rules but run without a shell. Every call
gets its own temporary directory, so concurrent use is safe.
"""

from __future__ import annotations

import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from multirecon.codec.base import Codec
from multirecon.core import Bitstream, Signal
from multirecon.pgm import PgmError, decode_pgm, encode_pgm, to_uint8


class CodecConfigError(ValueError):
    """The adapter configuration is unusable (bad template, missing executable)."""


class ExternalCodecError(RuntimeError):
    """An external tool failed; carries the command line and captured output."""

    def __init__(self, message: str, command: list[str] | None = None,
                 returncode: int | None = None, stderr: str = ""):
        detail = message
        if command:
            detail += f"\n  command: {shlex.join(command)}"
        if returncode is not None:
            detail += f"\n  exit status: {returncode}"
        if stderr:
            detail += f"\n  stderr: {stderr.strip()[-2000:]}"
        super().__init__(detail)
        self.command = command
        self.returncode = returncode
        self.stderr = stderr


@dataclass(frozen=True)
class ExternalCodecConfig:
    encoder: str
    decoder: str
    timeout: float = 120.0
    image_suffix: str = ".pgm"
    stream_suffix: str = ".bin"
    theta_min: int = 0
    theta_max: int = 51
    name: str = "external"


def _write_image(path: Path, pixels: np.ndarray) -> None:
    if path.suffix.lower() == ".pgm":
        path.write_bytes(encode_pgm(pixels))
        return
    from PIL import Image

    Image.fromarray(to_uint8(pixels)).save(path)


def _read_image(path: Path) -> np.ndarray:
    if path.suffix.lower() == ".pgm":
        return decode_pgm(path.read_bytes()).astype(np.float64)
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float64)


class ExternalCodec(Codec):
    """Wraps command-line codecs (e.g. an HEVC still-image encoder) as a :class:`Codec`.

    Images cross the process boundary as 8-bit files, so out-of-range
    samples are clamped on the way in. The rate is the compressed file's
    size in bits.
    """

    def __init__(self, config: ExternalCodecConfig):
        self.config = config
        self.name = config.name
        self.theta_range = (config.theta_min, config.theta_max)
        self._encoder = self._parse(config.encoder, "encoder")
        self._decoder = self._parse(config.decoder, "decoder")
        if config.timeout <= 0:
            raise CodecConfigError("timeout must be positive")

    @staticmethod
    def _parse(template: str, role: str) -> list[str]:
        try:
            argv = shlex.split(template)
        except ValueError as exc:
            raise CodecConfigError(f"{role} template does not parse: {exc}") from exc
        if not argv:
            raise CodecConfigError(f"{role} template is empty")
        joined = " ".join(argv)
        for key in ("input", "output"):
            if "{" + key + "}" not in joined:
                raise CodecConfigError(f"{role} template lacks the {{{key}}} placeholder")
        try:
            " ".join(argv).format(input="", output="", qp=0)
        except (KeyError, IndexError, ValueError) as exc:
            raise CodecConfigError(f"{role} template has an unknown placeholder: {exc}") from exc
        if shutil.which(argv[0]) is None:
            raise CodecConfigError(f"{role} executable not found: {argv[0]}")
        return argv

    def _run(self, argv: list[str], **values) -> None:
        command = [arg.format(**values) for arg in argv]
        try:
            proc = subprocess.run(command, capture_output=True, text=True,
                                  timeout=self.config.timeout)
        except subprocess.TimeoutExpired as exc:
            partial = exc.stderr or ""
            if isinstance(partial, bytes):  # TimeoutExpired ignores text=True
                partial = partial.decode(errors="replace")
            raise ExternalCodecError(f"timed out after {self.config.timeout:g} s", command,
                                     stderr=partial) from exc
        except OSError as exc:
            raise ExternalCodecError(f"could not start: {exc}", command) from exc
        if proc.returncode != 0:
            raise ExternalCodecError("non-zero exit", command, proc.returncode, proc.stderr)

    def compress(self, s: Signal, theta: int) -> Bitstream:
        lo, hi = self.theta_range
        if not lo <= theta <= hi:
            raise ValueError(f"QP {theta} outside [{lo}, {hi}]")
        with tempfile.TemporaryDirectory(prefix="multirecon-") as tmp:
            src = Path(tmp) / f"in{self.config.image_suffix}"
            dst = Path(tmp) / f"out{self.config.stream_suffix}"
            _write_image(src, s.pixels)
            self._run(self._encoder, input=str(src), output=str(dst), qp=int(theta))
            if not dst.exists():
                raise ExternalCodecError("encoder produced no output file", [str(a) for a in self._encoder])
            return Bitstream(dst.read_bytes())

    def decompress(self, b: Bitstream) -> Signal:
        with tempfile.TemporaryDirectory(prefix="multirecon-") as tmp:
            src = Path(tmp) / f"in{self.config.stream_suffix}"
            dst = Path(tmp) / f"out{self.config.image_suffix}"
            src.write_bytes(b.data)
            self._run(self._decoder, input=str(src), output=str(dst), qp=0)
            try:
                return Signal(_read_image(dst))
            except (OSError, PgmError, ValueError) as exc:
                raise ExternalCodecError(f"decoder output is not a readable image: {exc}") from exc

    def rate_of(self, b: Bitstream) -> int:
        return 8 * len(b.data)
