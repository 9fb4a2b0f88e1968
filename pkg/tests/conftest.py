import numpy as np
import pytest

from tmslab.numerics import build_grid, default_grid
from tmslab import stm


@pytest.fixture(scope="session")
def grid_default():
    return default_grid()


@pytest.fixture(scope="session")
def grid_small():
    """Coarse composite grid for fast operator tests."""
    return build_grid("gauss-legendre-composite", 192, 1e-3, 1e3)


@pytest.fixture(scope="session")
def stm_levels_default(grid_default):
    return stm.stm_spectrum(0.0, grid_default, n_levels=4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


_CRITERIA = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _CRITERIA[props["criterion"]] = (report.outcome, props.get("title", ""), props.get("detail", ""))


@pytest.fixture
def criterion(request, record_property):
    """Tag an acceptance test; call ``criterion(detail)`` to attach the measured values."""
    mark = request.node.get_closest_marker("criterion")
    record_property("criterion", mark.args[0])
    record_property("title", mark.args[1])

    def detail(text):
        record_property("detail", text)
        print(f"criterion {mark.args[0]:>2}: {text}")
    return detail


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        outcome, title, detail = _CRITERIA[n]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {n:>2} {verdict}  {title}" + (f"  [{detail}]" if detail else ""))
