import numpy as np
import pytest

from mtrack.synthetic import humanoid_skeleton


@pytest.fixture
def skel():
    return humanoid_skeleton()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (title, passed), filled by tests/test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}")
