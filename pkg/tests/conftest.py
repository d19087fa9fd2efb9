"""Independent brute-force oracles shared across the test modules."""

from __future__ import annotations

import itertools
import sys

import numpy as np
import pytest

from crossquad.cost import PolyCost


def monomial_terms(cost: PolyCost) -> dict[tuple[int, ...], float]:
    """{index tuple: coefficient}, enumerated with itertools and matched by explicit search."""
    terms = {}
    for alpha in range(1, cost.degree + 1):
        tuples = sorted(itertools.combinations(range(cost.n_dims), alpha), key=lambda t: t[::-1])
        for t, a in zip(tuples, cost.coeffs[alpha - 1]):
            terms[t] = float(a)
    return terms


def brute_eval(terms, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(sum(a * np.prod(x[list(t)]) for t, a in terms.items()))


def brute_field(terms, x, n) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    b = np.zeros(n)
    for t, a in terms.items():
        v = a * np.prod(x[list(t)])
        for i in t:
            b[i] += v
    return b


def brute_norm(terms, m) -> float:
    m = np.asarray(m, dtype=float)
    return float(np.sqrt(sum(a * a * np.prod(m[list(t)] ** 2) for t, a in terms.items())))


def all_states(n) -> np.ndarray:
    return np.array(list(itertools.product((-1, 1), repeat=n)), dtype=np.int8)


@pytest.fixture
def linear2():
    """N=2 cost with a = (0.6, 0.8, 0)."""
    return PolyCost.from_terms(2, 2, {(0,): 0.6, (1,): 0.8})


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
