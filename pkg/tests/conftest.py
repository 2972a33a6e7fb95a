import numpy as np
import pytest

from seldkit.core import SeldEvent

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): exit criterion, summarised at the end")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    label = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        prev = _ACCEPTANCE.get(label, "PASS")
        _ACCEPTANCE[label] = "PASS" if rep.passed and prev == "PASS" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{_ACCEPTANCE[label]:4}  {label}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_events(rng, n, class_id=0, lo=-90.0, hi=90.0):
    return [SeldEvent(class_id, float(rng.uniform(lo, hi)), float(rng.uniform(0.5, 5.0)),
                      bool(rng.random() < 0.5)) for _ in range(n)]
