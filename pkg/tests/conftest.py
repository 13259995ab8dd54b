import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from reggkm.data import SurvivalDataset, standardize  # noqa: E402


def random_dataset(rng, n, P, Q, censor=0.3, ties=False):
    time = rng.exponential(size=n)
    if ties:
        time = np.round(time, 1) + 0.1
    status = (rng.random(n) > censor).astype(int)
    return SurvivalDataset(time=time, status=status, x=rng.normal(size=(n, P)),
                           z=rng.uniform(0, 3, size=(n, Q)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_ds(rng):
    return standardize(random_dataset(rng, 40, 2, 3))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
