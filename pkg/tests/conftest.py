import math

import numpy as np
import pytest

from qkd4 import rng as rngmod


def analyzer_ket(theta_deg):
    t = math.radians(theta_deg)
    return np.array([math.cos(t), math.sin(t)])


def dm_coincidence(v, theta_a, theta_b, a, b):
    """Independent route: Tr[rho (P_a x P_b)] with an explicitly built two-qubit rho."""
    hh = np.kron([1.0, 0.0], [1.0, 0.0])
    vv = np.kron([0.0, 1.0], [0.0, 1.0])
    phi = (hh - vv) / math.sqrt(2.0)
    rho = v * np.outer(phi, phi) + (1 - v) * (np.outer(hh, hh) + np.outer(vv, vv)) / 2
    ka = analyzer_ket(theta_a + 90 * a)
    kb = analyzer_ket(theta_b + 90 * b)
    proj = np.kron(np.outer(ka, ka), np.outer(kb, kb))
    return float(np.trace(rho @ proj))


@pytest.fixture
def streams():
    return rngmod.streams(20240601)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
