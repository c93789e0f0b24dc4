import itertools
from pathlib import Path

import numpy as np
import pytest

from subopt.constraints import (
    GroupCapSystem,
    MatroidIntersection,
    PartitionMatroid,
    Unconstrained,
    UniformMatroid,
)
from subopt.objectives import (
    CoverageObjective,
    CutObjective,
    EntropyObjective,
    LogDetObjective,
    ModularObjective,
    nonnegative_shift,
)

DATA = Path(__file__).resolve().parents[1] / "src" / "subopt" / "data"


def subsets(n):
    for mask in range(1 << n):
        yield frozenset(i for i in range(n) if mask >> i & 1)


def random_cut(n, rng, density=0.5):
    edges = [(u, v, float(rng.uniform(0.1, 1.0)))
             for u, v in itertools.combinations(range(n), 2) if rng.random() < density]
    return CutObjective(n, edges)


def random_coverage(n, rng, universe=None, degree=3):
    universe = universe or 2 * n
    covers = [rng.choice(universe, size=degree, replace=False) for _ in range(n)]
    return CoverageObjective(covers, rng.uniform(0.5, 1.5, universe), universe)


def random_psd(n, rng, features=None):
    G = rng.standard_normal((features or n, n))
    return G.T @ G / (features or n) + 1e-3 * np.eye(n)


def random_logdet(n, rng):
    L = random_psd(n, rng, max(2, n // 2))
    return LogDetObjective(L, shift=nonnegative_shift(L))


def random_entropy(n, rng):
    S = random_psd(n, rng)
    d = np.sqrt(np.diag(S))
    return EntropyObjective(S / np.outer(d, d))


def random_modular(n, rng):
    return ModularObjective(rng.uniform(0, 1, n))


OBJECTIVE_MAKERS = {
    "cut": random_cut,
    "coverage": random_coverage,
    "logdet": random_logdet,
    "entropy": random_entropy,
    "modular": random_modular,
}


def small_systems(n, rng):
    """One instance of every shipped constraint type on ``n`` elements."""
    half = n // 2
    part = PartitionMatroid(n, [list(range(half)), list(range(half, n))], [1, 2])
    part2 = PartitionMatroid(n, [list(range(0, n, 2)), list(range(1, n, 2))], [2, 1])
    groups = [sorted(rng.choice(n, size=max(2, n // 2), replace=False).tolist()) for _ in range(3)]
    return {
        "free": Unconstrained(n),
        "uniform": UniformMatroid(n, max(1, n // 3)),
        "partition": part,
        "intersection": MatroidIntersection([UniformMatroid(n, 3), part2]),
        "group_cap": GroupCapSystem(n, groups, [1, 2, 1]),
    }


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def stations_csv():
    return DATA / "stations12.csv"
