import sys
import numpy as np
import pytest

from online_dcopf import load_case
from online_dcopf.network import Network


@pytest.fixture(scope="session")
def ieee14():
    return load_case("ieee14")


def path_network(reactances, gens=None, loads=None, slack=0):
    n = len(reactances) + 1
    lines = [(k, k + 1, x) for k, x in enumerate(reactances)]
    return Network(n, slack, lines, gens or {}, loads or {})


def random_connected_network(rng, n, extra_edges=None, gens=None, loads=None):
    """Random spanning tree plus a few chords; reactances in [0.02, 0.3]."""
    order = rng.permutation(n)
    edges = set()
    for k in range(1, n):
        i, j = int(order[k]), int(order[rng.integers(0, k)])
        edges.add((min(i, j), max(i, j)))
    extra = rng.integers(0, n) if extra_edges is None else extra_edges
    for _ in range(extra):
        i, j = rng.choice(n, size=2, replace=False)
        edges.add((int(min(i, j)), int(max(i, j))))
    lines = [(i, j, float(rng.uniform(0.02, 0.3))) for i, j in sorted(edges)]
    return Network(n, 0, lines, gens or {}, loads or {})


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.format_line(k))
