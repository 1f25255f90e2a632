import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nlslab.field import GridSpec
from nlslab.groundstate import closed_form_1d
from nlslab.nonlinearity import NonlinearityModel

settings.register_profile("lab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("lab")

_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def grid1():
    return GridSpec(1, 20.0, 4096)


@pytest.fixture(scope="session")
def wide_grid():
    return GridSpec(1, 40.0, 8192)


@pytest.fixture(scope="session")
def septic():
    return NonlinearityModel.pure_power(7.0)


@pytest.fixture(scope="session")
def cubic():
    return NonlinearityModel.pure_power(3.0)


@pytest.fixture(scope="session")
def gs7(grid1):
    return closed_form_1d(7.0, 1.0, grid1)


@pytest.fixture(scope="session")
def gs3(grid1):
    return closed_form_1d(3.0, 1.0, grid1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])
    seen = []

    def record(number: int, ok: bool, detail: str) -> bool:
        seen.append(number)
        lines.append((number, bool(ok), detail))
        return ok

    yield record
    if not seen:
        lines.append((request.node.name, False, "errored before reporting"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(lines, key=lambda x: str(x[0]).zfill(3)):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
