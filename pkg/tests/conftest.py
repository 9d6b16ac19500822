
import numpy as np
import pytest

from ipdecomp.functions import Linear, Quadratic
from ipdecomp.generators import GenSpec, generate
from ipdecomp.problem import Block, Box, SeparableProblem


def two_block_qp(seed=0, n=3):
    """Two strictly convex blocks in [0, 2]^n coupled by x_1 + x_2 = b."""
    rng = np.random.default_rng(seed)
    blocks = []
    for _ in range(2):
        M = rng.normal(size=(n, n))
        blocks.append(
            Block(
                objective=Quadratic(M @ M.T + np.eye(n), rng.normal(size=n)),
                box=Box(np.zeros(n), np.full(n, 2.0)),
                A=np.zeros((0, n)),
                a=np.zeros(0),
                B=np.eye(n),
            )
        )
    return SeparableProblem(blocks, np.full(n, 2.0))


def linear_block(c, lower, upper, A=None, a=None, B=None, m=0):
    n = len(c)
    A = np.zeros((0, n)) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
    a = np.zeros(A.shape[0]) if a is None else np.asarray(a, dtype=float)
    B = np.zeros((m, n)) if B is None else np.atleast_2d(np.asarray(B, dtype=float))
    return Block(Linear(c), Box(lower, upper), A, a, B)


@pytest.fixture
def qp2():
    return two_block_qp()


@pytest.fixture(scope="session")
def small_quadratic():
    return generate(GenSpec("quadratic", 3, 6, 3, seed=1))


@pytest.fixture(scope="session")
def small_network():
    return generate(GenSpec("network", 4, 8, 3, seed=1))


# PASS/FAIL lines from the acceptance suite, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
