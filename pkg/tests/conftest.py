import numpy as np
import pytest

from kyle_disclosure import MarketParams, solve_closed_form


def rel_err(a, b):
    """Elementwise relative error; exact zeros are scaled by the field's magnitude."""
    a, b = np.atleast_1d(np.asarray(a, float)), np.atleast_1d(np.asarray(b, float))
    scale = np.max(np.abs(a)) if a.size else 1.0
    den = np.where(a != 0, np.abs(a), scale if scale > 0 else 1.0)
    return np.abs(a - b) / den


@pytest.fixture
def base():
    params = MarketParams(n_rounds=4, n_makers=3)
    return params, solve_closed_form(params)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_line():
    """Record one PASS/FAIL line for the end-of-run acceptance summary."""

    def record(criterion, passed, detail):
        line = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
