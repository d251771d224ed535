import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hardyscope.specop import circle_derivative, divergence_form_1d, hodge_dirac_graph, cycle_incidence

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def circle32():
    return circle_derivative(32)


@pytest.fixture(scope="session")
def circle64():
    return circle_derivative(64)


@pytest.fixture(scope="session")
def hodge8():
    return hodge_dirac_graph(cycle_incidence(8))


@pytest.fixture(scope="session")
def divergence16():
    return divergence_form_1d(16, lambda x: 1.0 + 0.5 * np.sin(2 * np.pi * x), 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
