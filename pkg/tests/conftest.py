import os

import pytest
from hypothesis import settings

from solar_planner.distribution import LogLogisticIncome
from solar_planner.household import CostParameters, IncomeModel

settings.register_profile("default", max_examples=60, deadline=None)
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def costs():
    return CostParameters()


@pytest.fixture(scope="session")
def income():
    return IncomeModel()


@pytest.fixture(scope="session")
def dist():
    return LogLogisticIncome(70_000.0, 2.5)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}")
