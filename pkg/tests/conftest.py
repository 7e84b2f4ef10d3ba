import functools

import pytest

from fraclattice.grid import make_grid
from fraclattice.tree import calibrate


@functools.lru_cache(maxsize=None)
def calibrated(n: int, hurst: float, max_iter: int = 500, tol: float = 0.0):
    return calibrate(make_grid(n, 1.0, n, hurst), max_iter=max_iter, tol=tol)


@pytest.fixture(scope="session")
def tree_h083():
    return calibrated(64, 0.83)


@pytest.fixture(scope="session")
def tree_h07():
    return calibrated(64, 0.7)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one acceptance line; the outcome is asserted by the caller."""

    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number} [{title}]: {'PASS' if ok else 'FAIL'} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
