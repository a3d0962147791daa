import time
from contextlib import contextmanager

import pytest

from cdcgraph.knowledge import load_fixture

# one line per acceptance criterion, echoed again in the terminal summary
CRITERIA: list[str] = []


@contextmanager
def _criterion(number: int, title: str, limit: float | None = None):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        reason = (str(exc).strip().splitlines() or [type(exc).__name__])[0]
        line = f"FAIL criterion {number:>2}: {title} [{time.perf_counter() - t0:.2f}s] {reason}"
        CRITERIA.append(line)
        print(line)
        raise
    elapsed = time.perf_counter() - t0
    if limit is not None and elapsed >= limit:
        line = f"FAIL criterion {number:>2}: {title} [{elapsed:.2f}s] over the {limit:g}s limit"
        CRITERIA.append(line)
        print(line)
        raise AssertionError(line)
    line = f"PASS criterion {number:>2}: {title} [{elapsed:.2f}s]"
    CRITERIA.append(line)
    print(line)


@pytest.fixture
def criterion():
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def exp1():
    return load_fixture("experiment1.kb")


@pytest.fixture
def exp2():
    return load_fixture("experiment2.kb")


@pytest.fixture
def phq():
    return load_fixture("phq9.kb")
