"""Shared fixtures and the acceptance-criteria summary hook.

Most tests run on a deliberately small field and a 5-ray-per-head scanner so
world construction and demo rollouts stay fast; tests that need the full
default geometry build it themselves.
"""

from __future__ import annotations

import numpy as np
import pytest

from rowturn.config import RayParams
from rowturn.demos import PursuitParams, plan_row_skip_path
from rowturn.world import FieldSpec, RobotSpec, generate_field

SMALL_FIELD = FieldSpec(num_rows=4, row_length=4.0, seed=11)

# Filled by tests/test_acceptance.py; printed once at the end of the run so
# every criterion gets one visible pass/fail line regardless of capture mode.
ACCEPTANCE_LINES: list[str] = []


def record_criterion(num: int, name: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(
        f"CRITERION {num} {'PASS' if passed else 'FAIL'} - {name}: {detail}"
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_stalks():
    return generate_field(SMALL_FIELD)


@pytest.fixture(scope="session")
def robot():
    return RobotSpec()


@pytest.fixture(scope="session")
def rays5():
    return RayParams(n_rays=5).build()


@pytest.fixture(scope="session")
def small_path(small_stalks):
    return plan_row_skip_path(small_stalks, start_lane=0)


@pytest.fixture(scope="session")
def pursuit():
    return PursuitParams()


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.PCG64(1234))
