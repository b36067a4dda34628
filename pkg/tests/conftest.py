import numpy as np
import pytest

from pathreshape.env import Obstacle, Workspace, rasterize_and_dilate

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def ws96():
    return Workspace(9.0, 6.0)


@pytest.fixture(scope="session")
def empty_env(ws96):
    return rasterize_and_dilate(ws96, [], 0.1, 0.1)


@pytest.fixture(scope="session")
def box_env(ws96):
    """One 1x1 rectangle in the middle of the 9x6 workspace."""
    return rasterize_and_dilate(ws96, [Obstacle.rectangle((4.5, 3.0), 1.0, 1.0)], 0.1, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
