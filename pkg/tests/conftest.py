import numpy as np
import pytest

from bassnet.network import build_custom


def random_network(rng: np.random.Generator, m: int, density: float = 0.7):
    """Random custom network with rates bounded away from zero.

    Every node keeps at least one incoming edge so the in-influence
    invariant holds.
    """
    p = rng.uniform(0.05, 0.6, m)
    entries = []
    for j in range(m):
        sources = [i for i in range(m) if i != j]
        keep = [i for i in sources if rng.random() < density]
        if not keep:
            keep = [int(rng.choice(sources))]
        entries += [(i, j, float(rng.uniform(0.05, 0.8))) for i in keep]
    return build_custom(p, entries)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def report_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
