"""Shared fixtures and the acceptance-criteria reporting hook."""

import numpy as np
import pytest

_ACCEPTANCE_RESULTS = []


@pytest.fixture
def acceptance_report():
    """Record one pass/fail line per acceptance criterion for the summary."""

    def record(number, name, passed):
        _ACCEPTANCE_RESULTS.append((number, name, passed))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed in sorted(_ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status}  {name}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
