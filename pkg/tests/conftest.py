import math

import pytest

from wtfbf.params import validate

# 2*pi / (Gamma(2H+1) * sin(pi*H)), evaluated with mpmath at 40 digits
FBM_CONSTANT = {
    0.15: 15.42101026861968117,
    0.3: 8.692009780350465746,
    0.45: 6.614402166654937596,
    0.5: 2 * math.pi,
    0.7: 6.252323154860265131,
}


@pytest.fixture
def reference_params():
    return validate(0.5, 0.3)


@pytest.fixture
def aniso_params():
    return validate(0.4, 0.4, (0.7, 1.3))


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
