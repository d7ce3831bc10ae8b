import numpy as np
import pytest

from stefanctl.graph import MollifiedGraph, two_phase_graph


@pytest.fixture
def two_phase():
    """Unit jump at 0 with identity branches."""
    return two_phase_graph(0.0, 1.0, 1.0, 1.0)


@pytest.fixture
def two_phase_n10(two_phase):
    return MollifiedGraph(two_phase, 10)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one ``criterion N: PASS|FAIL detail`` line, shown in the terminal summary."""
    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
