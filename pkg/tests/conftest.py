import time
from contextlib import contextmanager

import pytest

from ldpc_lab import kernels

_LINES = []


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    """Record a PASS/FAIL line for an acceptance criterion, with its runtime."""

    @contextmanager
    def record(label, budget_s=None):
        info = {}
        t0 = time.perf_counter()
        try:
            yield info
            elapsed = time.perf_counter() - t0
            if budget_s is not None:
                assert elapsed < budget_s, f"runtime {elapsed:.1f}s over budget {budget_s}s"
        except BaseException as exc:
            elapsed = time.perf_counter() - t0
            msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            _LINES.append(f"FAIL {label} ({elapsed:.1f}s) {info} :: {msg}")
            print(_LINES[-1])
            raise
        _LINES.append(f"PASS {label} ({elapsed:.1f}s) {info}")
        print(_LINES[-1])

    return record


@pytest.fixture(params=kernels.available())
def backend(request):
    return request.param
