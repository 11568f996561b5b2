from pathlib import Path

import numpy as np
import pytest

from multirecon.core import DegradationEnsemble, Signal
from multirecon.operators import gaussian_blur
from multirecon.pgm import read_pgm

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"
THREE_DISPLAY_CFG = ROOT / "ensembles" / "paper_sec3.cfg"

DISPLAY_SIGMAS = (0.6, 0.8, 1.0)
DISPLAY_PROBS = (0.6, 0.3, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(20171016)


@pytest.fixture(scope="session")
def three_displays():
    return DegradationEnsemble(tuple(
        (gaussian_blur(15, s), p) for s, p in zip(DISPLAY_SIGMAS, DISPLAY_PROBS)))


@pytest.fixture(scope="session")
def corpus_paths():
    paths = sorted(CORPUS.glob("*.pgm"))
    assert len(paths) == 12, "run scripts/make_corpus.py to regenerate corpus/"
    return paths


@pytest.fixture(scope="session")
def corpus(corpus_paths):
    return [read_pgm(p) for p in corpus_paths]


@pytest.fixture(scope="session")
def crop64(corpus):
    x = corpus[0]
    return x.like(x.pixels[32:96, 32:96])



# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[str, str] = {}


def record_criterion(key: str, ok, detail: str) -> None:
    status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
    line = f"criterion {key}: {status} - {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.rstrip("abcdefgh")), k)):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
