import numpy as np
import pytest

from stab.coeffs import LayerSchedule
from stab.spectral import FrequencyGrid, build_eigensystem

_CRITERIA = []


@pytest.fixture
def report():
    """Record one pass/fail line for an acceptance criterion."""
    def _report(number, ok, detail=""):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        print(line)
        _CRITERIA.append(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def eig8():
    return build_eigensystem(FrequencyGrid(8, 8), blur_k=3, epsilon=1e-2)


@pytest.fixture(scope="session")
def eig16():
    return build_eigensystem(FrequencyGrid(16, 16), blur_k=3, epsilon=1e-2)


def random_schedule(rng, m, stationary=False, chi_bar=None):
    """Schedule with parameters in the ranges used by the experiments."""
    size = 1 if stationary else m
    lam = rng.uniform(0.05, 1.9, size)
    tau = rng.uniform(0.0, 0.05, size)
    eta = rng.uniform(0.0, 1.0, size)
    mu = rng.uniform(0.0, 2.0, size)
    if chi_bar is None:
        chi_bar = rng.choice([0.0, rng.uniform(0.0, 0.1)])
    if stationary:
        lam, tau, eta, mu = lam[0], tau[0], eta[0], mu[0]
    return LayerSchedule.build(m, lam, tau, eta, mu, chi_bar)
