import numpy as np
import pytest

from aminothread.proposals import oracle_detect
from aminothread.synthetic import build_chain, helix, STRAND
from aminothread.volume import Residue, Structure


@pytest.fixture(scope="session")
def helix50():
    return helix(50)


@pytest.fixture(scope="session")
def strand30():
    rng = np.random.default_rng(7)
    from aminothread.synthetic import random_sequence
    return build_chain(random_sequence(30, rng), STRAND)


@pytest.fixture(scope="session")
def oracle50(helix50):
    return oracle_detect(helix50)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def glycine(offset=(0.0, 0.0, 0.0), seq_id=1):
    coords = np.array([[0.0, 0.0, 0.0], [1.458, 0.0, 0.0], [2.009, 1.42, 0.0], [1.25, 2.38, 0.6]])
    return Residue("GLY", ("N", "CA", "C", "O"), coords + np.asarray(offset), seq_id)


@pytest.fixture
def gly_chain():
    return Structure([glycine((3.8 * i, 0.0, 0.0), i + 1) for i in range(3)], "A")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
