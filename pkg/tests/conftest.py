import numpy as np
import pytest

from meyerlab import Box, build_pointset, fibonacci_scheme, generate_fibonacci, integer_scheme

#: Lines recorded by the acceptance module, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def fib():
    return generate_fibonacci(10_000)


@pytest.fixture(scope="session")
def fib_small():
    return generate_fibonacci(1_000)


@pytest.fixture(scope="session")
def zset():
    return build_pointset(1, np.arange(10_000, dtype=float), Box((0.0,), (10_000.0,)))


@pytest.fixture(scope="session")
def fib_scheme():
    return fibonacci_scheme()


@pytest.fixture(scope="session")
def z_scheme():
    return integer_scheme(1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
