import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from monitored_chain.model import ChainConfig

settings.register_profile(
    "suite", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("suite")

#: lines reported by tests/test_acceptance.py, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    return ChainConfig(L=32, R=4, m=1.0, gamma=0.5, omega0=4.0, t_max=10.0, dt_out=0.5)
