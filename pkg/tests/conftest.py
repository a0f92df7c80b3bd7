import itertools

import numpy as np
import pytest

from pmdkit.pmd_core import LatticeDistribution, validate_params


def random_params(rng, n, k, alpha=1.0):
    return validate_params(rng.dirichlet(np.full(k, alpha), size=n))


def brute_force_pmf(params):
    """Sum over every outcome sequence: the definition of the PMD, used as an oracle."""
    n, k = params.matrix.shape
    out = {}
    for seq in itertools.product(range(k), repeat=n):
        p = 1.0
        x = [0] * k
        for i, j in enumerate(seq):
            p *= params.matrix[i, j]
            x[j] += 1
        out[tuple(x)] = out.get(tuple(x), 0.0) + p
    return LatticeDistribution({z: p for z, p in out.items() if p > 0}, k)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
