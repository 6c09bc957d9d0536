import numpy as np
import pytest

from netpower.graph import Graph, GraphProfile, erdos_renyi, generate

DESK_SEED = 1


@pytest.fixture(scope="session")
def desk_graph() -> Graph:
    return generate(GraphProfile(868, 0.022), DESK_SEED)


@pytest.fixture(scope="session")
def small_er_graphs():
    """A handful of seeded G(n, p) draws with 6 to 10 nodes."""
    out = []
    for seed, (n, p) in enumerate([(6, 0.4), (8, 0.3), (9, 0.35), (10, 0.25)]):
        out.append(erdos_renyi(n, p, seed + 100))
    return out


def sem_ok(estimate, truth, se, k=3.0):
    """``|estimate - truth| <= k * se`` elementwise."""
    return np.all(np.abs(np.asarray(estimate) - np.asarray(truth)) <= k * np.asarray(se) + 1e-12)


# criterion lines recorded by the acceptance suite, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
