import numpy as np
import pytest

from kgcontrol import State, TorusGrid
from kgcontrol.fields import make_field


@pytest.fixture
def grid64():
    return TorusGrid(1, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def smooth_state(grid64):
    return State(make_field(grid64, "1 + 0.3*cos(x)"), make_field(grid64, "0.2*sin(2*x)"))


ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion and print it."""
    def record(label: str, parts: dict[str, bool], detail: str) -> bool:
        ok = all(parts.values())
        failed = [k for k, v in parts.items() if not v]
        line = f"{label}: {'PASS' if ok else 'FAIL'}  {detail}"
        if failed:
            line += f"  [failed: {', '.join(failed)}]"
        ACCEPTANCE_LINES[request.node.name] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for name in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[name])
