import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("relframes", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("relframes")


def philox(seed):
    return np.random.Generator(np.random.Philox(seed))


@pytest.fixture
def rng():
    return philox(20240611)


def rand_matrix(rng, d):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    rep = outcome.get_result()
    num, title = mark.args
    ok = _CRITERIA.get(num, (title, True, 0.0))[1]
    if rep.when == "call" or rep.failed:
        ok = ok and rep.passed
        _CRITERIA[num] = (title, ok, _CRITERIA.get(num, (title, True, 0.0))[2] + rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, ok, dur = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {title}  ({dur:.2f} s)")
