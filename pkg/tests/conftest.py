import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fwnoise.frackernel import HurstModel

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

HURSTS = (0.6, 0.75, 0.9)


@pytest.fixture(scope="session")
def model():
    return HurstModel(0.75)


@pytest.fixture(params=HURSTS, ids=lambda h: f"H={h}", scope="session")
def any_model(request):
    return HurstModel(request.param)


def within_se(estimate, se, target, k=4.0):
    return abs(estimate - target) <= k * se


def mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


# one line per acceptance criterion, filled by test_acceptance and echoed at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
