import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tvselect import _backend

settings.register_profile(
    "repo", derandomize=True, deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


def _available():
    names = ["python"]
    try:
        from tvselect import _ckernels  # noqa: F401
    except ImportError:
        return names
    return ["cython"] + names


@pytest.fixture(params=_available())
def backend(request):
    prev = _backend.name
    _backend.use(request.param)
    yield request.param
    _backend.use(prev)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record ``(criterion, passed, detail)``; printed together after the run."""

    def record(number, passed, detail):
        _ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
