import numpy as np
import pytest

from acmcf.geometry import DomainBoundary
from acmcf.potentials import build_profile, make_quartic_well


@pytest.fixture(scope="session")
def well():
    return make_quartic_well()


@pytest.fixture(scope="session")
def profile(well):
    return build_profile(well)


@pytest.fixture(scope="session")
def disk():
    return DomainBoundary()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one verdict line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def verdict():
    def record(number: int, passed: bool, detail: str = "") -> bool:
        ACCEPTANCE[number] = (bool(passed), detail)
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
