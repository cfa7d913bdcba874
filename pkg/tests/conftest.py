import warnings

import numpy as np
import pytest

from riskysci import Params, SeedSpec, derive_trial_rng

_ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return derive_trial_rng(SeedSpec(12345, 0))


@pytest.fixture
def params():
    return Params()


def make_params(**kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Params(**kw)


@pytest.fixture(scope="session")
def acceptance_report():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


def sigma3(p, n):
    return 3 * np.sqrt(p * (1 - p) / n)
