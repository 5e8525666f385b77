import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from lrapomdp import corpus  # noqa: E402


@pytest.fixture
def ex1():
    return corpus.ex1()


@pytest.fixture
def ex2():
    return corpus.ex2()


@pytest.fixture
def triv1():
    return corpus.triv1()


@pytest.fixture
def sigma_star():
    return corpus.ex2_optimal()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "SUMMARY", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
