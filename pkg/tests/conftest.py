import numpy as np
import pytest

from attnrmt.rng import RngStream

ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


@pytest.fixture
def gen():
    return RngStream(20240601, 0).generator()


@pytest.fixture
def random_square(gen):
    return gen.standard_normal((10, 10))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def markov(T, seed, sigma_a=1.0, stream=0):
    from attnrmt.ensembles import sample_markov

    return sample_markov(T, sigma_a, RngStream(seed, stream))
