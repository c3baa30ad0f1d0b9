import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from hiopt import _accel  # noqa: E402
from hiopt.objectives import Objective  # noqa: E402
from hiopt.partition import Box  # noqa: E402

# criterion number -> (title, [(nodeid, passed, detail)])
_CRITERIA: dict[int, tuple[str, list]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion this test checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        num, title = mark.args
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "measured")
        _CRITERIA.setdefault(num, (title, []))[1].append((item.nodeid, rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, results = _CRITERIA[num]
        ok = all(passed for _, passed, _ in results)
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {title}")
        for nodeid, passed, detail in results:
            if len(results) > 1 or not passed or detail:
                name = nodeid.split("::", 1)[-1]
                tr.write_line(f"         {'ok  ' if passed else 'FAIL'} {name}" + (f"  ({detail})" if detail else ""))


@pytest.fixture
def measured(record_property):
    """``measured("regret=...")`` attaches a value to the acceptance summary line."""

    def put(text):
        record_property("measured", text)

    return put


def _bowl(x, theta):
    return -((x[0] - 0.3) ** 2) - 2.0 * (x[1] - 0.7) ** 2


bowl_point = _accel.jit_point(_bowl)


@pytest.fixture(scope="session")
def bowl2d():
    """Smooth 2-D objective on a non-square box, maximum 0 at (0.3, 0.7)."""
    return Objective(
        "bowl",
        Box([0.0, -1.0], [1.0, 2.0]),
        bowl_point,
        known_max=(np.array([0.3, 0.7]), 0.0),
    )
