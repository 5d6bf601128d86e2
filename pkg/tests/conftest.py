import warnings

import pytest
from hypothesis import HealthCheck, settings

from mpa.errors import RegimeWarning

settings.register_profile(
    "mpa", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("mpa")

# filled by test_acceptance.py, echoed once at the end of the run
ACCEPTANCE_LINES = []


@pytest.fixture
def no_regime_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
