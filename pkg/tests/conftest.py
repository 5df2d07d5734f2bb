import numpy as np
import pytest

from mvtest.manova import GroupedDataset


def random_spd(rng, n, cond=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    d = np.exp(rng.uniform(0.0, np.log(cond), n))
    return (q * d) @ q.T


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture
def table4_like(rng):
    """r = 3, g = 3, sizes (20, 20, 10): the design of the fixed-dataset example."""
    return GroupedDataset([rng.standard_normal((n, 3)) for n in (20, 20, 10)])


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[key])
