import numpy as np
import pytest

from tclprep.bath import Bath, CorrelationFunction, OhmicSpectralDensity
from tclprep.scenarios import tls_hamiltonian


@pytest.fixture(scope="session")
def bath100():
    return Bath(OhmicSpectralDensity(100.0, 0.05))


@pytest.fixture(scope="session")
def corr100(bath100):
    return CorrelationFunction(bath100)


@pytest.fixture(scope="session")
def H0():
    return tls_hamiltonian(1.0)


def random_hermitian(rng, d):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (X + X.conj().T)


def random_density(rng, d):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = X @ X.conj().T
    return rho / np.trace(rho)


CRITERIA = {}


@pytest.fixture
def criterion():
    """Record ``(number, passed, detail)`` for the acceptance report."""
    def record(number, passed, detail):
        CRITERIA[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")
