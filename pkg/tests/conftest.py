import itertools

import numpy as np
import pytest

from acop import NegotiationSpace, UtilityFunction

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)


def brute_utility(u, offer):
    """Plain sum over issues, left to right."""
    return sum(float(u.weights[i] * u.evaluations[i][v]) for i, v in enumerate(offer))


def brute_offers(sizes):
    return list(itertools.product(*(range(m) for m in sizes)))


def brute_max(u, sizes):
    return max(brute_utility(u, o) for o in brute_offers(sizes))


def brute_forbidden(u, sizes, threshold):
    """Cells that appear in no offer reaching ``threshold``."""
    seen = set()
    for o in brute_offers(sizes):
        if brute_utility(u, o) >= threshold:
            seen.update(enumerate(o))
    return {(i, v) for i, m in enumerate(sizes) for v in range(m)} - seen


def brute_solutions(ua, ub, sizes, ta, tb):
    return sum(
        1 for o in brute_offers(sizes) if brute_utility(ua, o) >= ta and brute_utility(ub, o) >= tb
    )


def random_utility(rng, sizes, low=0, high=100, uniform_weights=True):
    rows = [rng.integers(low, high, size=m, endpoint=True).astype(float) for m in sizes]
    if uniform_weights:
        return UtilityFunction.uniform(rows)
    w = rng.random(len(sizes)) + 0.05
    return UtilityFunction(tuple(rows), w / w.sum())


def random_sizes(rng, max_issues=4, max_values=4):
    n = int(rng.integers(1, max_issues + 1))
    return tuple(int(m) for m in rng.integers(1, max_values + 1, size=n))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def example_scenario():
    """3 issues x 6 values, uniform weights; A cannot live with issue 2 = v2."""
    space = NegotiationSpace.uniform(3, 6)
    a = UtilityFunction.uniform(
        [[0, 50, 0, 0, 60, 100], [0, -1000, 0, 0, 60, 100], [0, 50, 0, 0, 60, 100]]
    )
    b = UtilityFunction.uniform([[0, 100, 0, 0, 0, 0], [0, 100, 0, 0, 90, 0], [0, 100, 0, 0, 0, 0]])
    return space, a, b
