import numpy as np
import pytest

import acceptance_log

from tensorqpt.kernels import kernel_preset, rank_one_modify, select_anchor
from tensorqpt.smolyak import build_univariate_sequence, measure_rate
from tensorqpt.spectral import discretize_problem, eigensystem
from tensorqpt.univariate import build_split

ORACLE_M = 32

def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance_log.LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sobolev():
    return kernel_preset("sobolev")


@pytest.fixture(scope="session")
def base_problem(sobolev):
    return discretize_problem(sobolev, ORACLE_M)


@pytest.fixture(scope="session")
def base_spectrum(base_problem):
    return eigensystem(base_problem, ORACLE_M)


@pytest.fixture(scope="session")
def modified_kernel(sobolev, base_spectrum):
    return rank_one_modify(sobolev, base_spectrum, select_anchor(base_spectrum))


@pytest.fixture(scope="session")
def problem(modified_kernel):
    return discretize_problem(modified_kernel, ORACLE_M, normalize=True)


@pytest.fixture(scope="session")
def spectrum(problem):
    return eigensystem(problem, ORACLE_M)


@pytest.fixture(scope="session")
def split(spectrum):
    return build_split(spectrum)


@pytest.fixture(scope="session")
def sequence(split):
    return build_univariate_sequence(split)


@pytest.fixture(scope="session")
def rate(split, sequence):
    return measure_rate(split, sequence)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
