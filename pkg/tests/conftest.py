import numpy as np
import pytest

from submax.constraints import GraphicMatroid, PartitionMatroid, UniformMatroid
from submax.functions import CoverageFunction, ModularFunction
from submax.instances import random_coverage, random_graph_cut, random_partition_matroid


@pytest.fixture
def small_coverage():
    # e0 -> {1,2,3}, e1 -> {3,4}, e2 -> {1,2}, e3 -> {5}
    return CoverageFunction([[1, 2, 3], [3, 4], [1, 2], [5]])


@pytest.fixture
def modular4():
    return ModularFunction([5.0, 3.0, 2.0, 1.0])


def coverage_battery(count, n, seed=0, density=0.3):
    rng = np.random.default_rng(seed)
    return [random_coverage(n, rng, items=2 * n, density=density).build() for _ in range(count)]


def cut_battery(count, n, seed=0, p=0.5):
    rng = np.random.default_rng(seed)
    return [random_graph_cut(n, rng, p=p).build() for _ in range(count)]


def matroid_battery(n, seed=0):
    """One of each shipped matroid family on n elements."""
    rng = np.random.default_rng(seed)
    verts = max(3, n // 2)
    edges = [tuple(sorted(int(a) for a in rng.choice(verts, 2, replace=False))) for _ in range(n)]
    return [UniformMatroid(n, 3), random_partition_matroid(n, 3, 1, rng),
            PartitionMatroid(n, [range(0, n // 2), range(n // 2, n)], [2, 1]), GraphicMatroid(edges)]


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}
ACCEPTANCE_COUNT = 11


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, ACCEPTANCE_COUNT + 1):
        terminalreporter.write_line(ACCEPTANCE.get(k, f"criterion {k:2d}: NOT RUN"))
