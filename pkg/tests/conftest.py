from __future__ import annotations

import numpy as np
import pytest

from hardy_sobolev.params import ProblemParams
from hardy_sobolev.quadrature import build_log_grid


@pytest.fixture(scope="session")
def grid():
    return build_log_grid()


@pytest.fixture(scope="session")
def p32():
    return ProblemParams(3, 2.0)


@pytest.fixture(scope="session")
def exp_profile(grid):
    from hardy_sobolev.profile import RadialProfile

    return RadialProfile(grid, np.exp(-grid.nodes))


def rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
