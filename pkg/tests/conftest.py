from pathlib import Path

import numpy as np
import pytest

from keyspace.cipher import make_instance
from keyspace.corpus import build_alphabet, load_text
from keyspace.ngram import train

DATA = Path(__file__).parent / "data"
LEE = DATA / "lee_background.txt"

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def lee_path():
    return LEE


@pytest.fixture(scope="session")
def modern():
    return build_alphabet("modern")


@pytest.fixture(scope="session")
def lee_modern(modern):
    return load_text(LEE, modern, "lee")


@pytest.fixture(scope="session")
def trigram_modern(lee_modern):
    return train(lee_modern, 3)


def toy_alphabet(symbols: str):
    """Small alphabet keeping only the given letters of English text."""
    return build_alphabet("custom", {"symbols": symbols})


def toy_instance(symbols: str, length: int, seed: int, order: int = 3, self_trained: bool = False):
    """Cipher instance and model over a reduced alphabet of real text."""
    a = toy_alphabet(symbols)
    corpus = load_text(LEE, a, "lee-" + symbols.lower())
    inst = make_instance(corpus, length, np.random.default_rng(seed))
    model = train(inst.plaintext if self_trained else corpus, order)
    return inst, model


@pytest.fixture(scope="session")
def toy5():
    return toy_instance("AEINT", 200, 11)


@pytest.fixture(scope="session")
def toy6_bigram():
    return toy_instance("AEINOT", 200, 5, order=2)
