import numpy as np
import pytest

from esml.dist_core import BivariateGaussian
from esml.es_sim import ConstantStep, ESConfig, run_chain

GAUSS = BivariateGaussian()
DEFAULT_SEED = 20240601


def default_config(**kw):
    base = dict(d=2, lam=2, n=(1.0, 0.0), movement=GAUSS, step=ConstantStep(1.0),
                seed=DEFAULT_SEED)
    base.update(kw)
    return ESConfig(**base)


@pytest.fixture(scope="session")
def default_traces():
    """1000 replicas of 2000 generations of the Gaussian default chain."""
    return run_chain(default_config(), 2000, 1000)


@pytest.fixture(scope="session")
def default_D(default_traces):
    return np.array([tr.D for tr in default_traces])


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)
