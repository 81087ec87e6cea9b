import math

import pytest

from levy_stop import BrownianDrift, CramerLundbergExp, StableSN


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo runs taking more than a few seconds")


@pytest.fixture
def jump_model():
    """psi(l) = 0.18 l + 0.02 l^2 - 0.25 l / (l + 4)."""
    return CramerLundbergExp(mu=0.18, sigma=0.2, jump_rate=0.25, jump_decay=4.0)


@pytest.fixture
def std_bm():
    return BrownianDrift(mu=0.0, sigma=1.0)


@pytest.fixture
def stable15():
    return StableSN(1.5)


def rel_err(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


GAMMA_15 = math.gamma(1.5)


# -- acceptance summary -------------------------------------------------------

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for key, value in report.user_properties:
        if key == "criterion":
            number, title = value
            _ACCEPTANCE[number] = (title, "PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} {verdict}  {title}")
