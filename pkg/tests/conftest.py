import numpy as np
import pytest

from dfapref.automaton import load_dfa
from dfapref.envs import ProductMDP, make_env


@pytest.fixture
def chain3():
    env = make_env("chain3")
    return env, load_dfa("chain3")


@pytest.fixture
def chain3_product(chain3):
    return ProductMDP(*chain3)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def replay(product, actions):
    """Roll out a fixed action sequence (stops early on acceptance)."""
    it = iter(actions)
    return product.rollout(lambda p, g: next(it), None, len(actions))


ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail):
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
