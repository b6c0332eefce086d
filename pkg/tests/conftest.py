import numpy as np
import pytest

from strobosam.duffing import OscillatorParams
from strobosam.experiment import ExperimentConfig, integrate_technique

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def reference_cfg():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def captured_run(reference_cfg):
    p = reference_cfg.params(1e-4, 0.05)
    return p, integrate_technique("direct", p, reference_cfg)


@pytest.fixture(scope="session")
def weak_run(reference_cfg):
    p = reference_cfg.params(1e-4, 0.01)
    return p, integrate_technique("direct", p, reference_cfg)


@pytest.fixture
def params():
    return OscillatorParams.reference()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
