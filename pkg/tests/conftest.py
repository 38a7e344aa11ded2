import contextlib
import warnings

import pytest
from hypothesis import HealthCheck, settings

from smallcell import ApproximationWarning

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])
settings.load_profile("default")

_VERDICTS = []


class _Check:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.detail = ""


@contextlib.contextmanager
def _criterion(number, title):
    chk = _Check(number, title)
    try:
        yield chk
    except BaseException as e:
        _VERDICTS.append((number, title, False, chk.detail or f"{type(e).__name__}: {e}"))
        raise
    _VERDICTS.append((number, title, True, chk.detail))


@pytest.fixture
def criterion():
    """``with criterion(n, title) as c: ...`` records one pass/fail verdict line."""
    return _criterion


@pytest.fixture(autouse=True)
def _quiet_approximation_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ApproximationWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_VERDICTS, key=lambda v: v[0]):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
