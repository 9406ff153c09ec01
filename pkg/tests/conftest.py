"""Shared fixtures plus the acceptance-criteria summary hook.

Acceptance tests record one human-readable pass/fail line each through the
`acceptance` fixture; the lines are printed as a dedicated section at the
end of the pytest run so the criteria can be audited at a glance.
"""
import numpy as np
import pytest

from ssvsridge.distributions import RngStream
from ssvsridge.model import Dataset
from ssvsridge.simdata import SimSpec, generate_simulated

_ACCEPTANCE_LINES = []


def _record(label: str, passed: bool, detail: str) -> bool:
    _ACCEPTANCE_LINES.append((label, bool(passed), detail))
    return bool(passed)


@pytest.fixture(scope="session")
def acceptance():
    """Recorder: acceptance("criterion 1", ok, "details") returns ok."""
    return _record


@pytest.fixture(scope="session")
def canonical():
    """Seeded instance of the 300-variable collinear generator (train,
    valid, truth) shared by the replication tests."""
    return generate_simulated(SimSpec(seed=21))


@pytest.fixture()
def margin_toy():
    """Separable probit problem with a clean margin around the boundary."""
    gen = RngStream(33).gen
    X_all = gen.uniform(-2.0, 2.0, size=(120, 4))
    X = X_all[np.abs(X_all[:, 0] + X_all[:, 1]) > 0.8]
    Y = (X[:, 0] + X[:, 1] > 0).astype(int)
    return Dataset(X=X, Z=np.zeros((X.shape[0], 0)), Y=Y, block_sizes=[])


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in _ACCEPTANCE_LINES:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{label}: {status} - {detail}")
