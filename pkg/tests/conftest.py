import numpy as np
import pytest

from wbiharm.exponents import ProblemParams
from wbiharm.radial_ode import shoot_navier_ball
from wbiharm.transform import RadialProfile

import oracles


@pytest.fixture(scope="session")
def p3():
    return ProblemParams(5, 0, 0, 3)


@pytest.fixture(scope="session")
def shot_p3(p3):
    return shoot_navier_ball(p3, 1.0)


@pytest.fixture(scope="session")
def crit_params():
    return ProblemParams(5, 0, 0, 9)


def critical_profile(r):
    return RadialProfile(r, *oracles.critical_solution(r), ProblemParams(5, 0, 0, 9), origin="closed form")


@pytest.fixture(scope="session")
def crit_profile():
    return critical_profile(np.geomspace(1e-2, 10.0, 2000))


# (criterion number, passed, elapsed seconds, limit, detail) collected by the acceptance suite
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, dt, limit, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail} ({dt:.2f} s, limit {limit:g} s)")
