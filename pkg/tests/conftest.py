from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from approachability.instances import controlled_chain, nonpositive_orthant, repeated_game

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def game():
    return repeated_game()


@pytest.fixture
def chain():
    return controlled_chain()


@pytest.fixture
def orthant():
    return nonpositive_orthant()
