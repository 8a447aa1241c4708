import numpy as np
import pytest

from dbarlab.geometry import ball, complex_ellipsoid


@pytest.fixture(scope="session")
def unit_ball():
    return ball()


@pytest.fixture(scope="session")
def ellipsoid():
    return complex_ellipsoid(2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def cpoints(*rows):
    return np.array(rows, dtype=complex)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
