import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from advmetrics.tensor import make_pair  # noqa: E402

_ACCEPTANCE = []


def random_pair(rng, shape=(8, 8, 3), scale=40.0):
    """Random original in [0, 255] and a clipped noisy copy."""
    x = rng.uniform(0, 255, size=shape)
    y = np.clip(x + rng.uniform(-scale, scale, size=shape), 0, 255)
    return make_pair(x, y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _ACCEPTANCE.append((report.nodeid.split("::")[-1], report.outcome, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, dur in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}  ({dur:.1f}s)")
