import sys
import warnings
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lecam_tails.densities import ClassParams, build_schedule, validate_pair  # noqa: E402


DESK = dict(alpha0=1.0, C0=1.0, epsilon=0.25, rho=1.0, A=2.0)
DESK_LAMBDA = 1.0
DESK_NU = 1.0 / 3.0


@pytest.fixture
def desk_params():
    return ClassParams(**DESK)


def make_pair(params, n, lam=DESK_LAMBDA, nu=DESK_NU):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sched = build_schedule(params, n, lam, nu)
    return validate_pair(sched, params)


@pytest.fixture
def desk_pair(desk_params):
    return make_pair(desk_params, 1000)


@pytest.fixture
def null_pair(desk_params):
    return make_pair(desk_params, 1000, lam=0.0)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
