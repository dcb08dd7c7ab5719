import math
import sys

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from srblab import RegionParams, linear_cat, neutral_cat

SQ5 = math.sqrt(5.0)
LAM1 = (3 + SQ5) / 2
EU = np.array([1.0, (SQ5 - 1) / 2]) / math.hypot(1.0, (SQ5 - 1) / 2)
ES = np.array([1.0, -(SQ5 + 1) / 2]) / math.hypot(1.0, (SQ5 + 1) / 2)


def psi_ref(rho, r0):
    """min(1, rho/r0^2) with a cubic blend on [0.9, 1] r0^2 (C^1 match of value and slope)."""
    a, b = 0.9 * r0**2, r0**2
    if rho <= a:
        return rho / b
    if rho >= b:
        return 1.0
    # Hermite cubic between (a, 0.9, slope 1/b) and (b, 1, slope 0)
    h = b - a
    t = (rho - a) / h
    h00, h10, h01, h11 = 2 * t**3 - 3 * t**2 + 1, t**3 - 2 * t**2 + t, -2 * t**3 + 3 * t**2, t**3 - t**2
    return h00 * 0.9 + h10 * h * (1 / b) + h01 * 1.0 + h11 * h * 0.0


def flow_ref(p, r0, direction=1):
    """Time-one map of u' = l u psi, s' = -l s psi by adaptive high-order integration."""
    w = np.asarray(p, float)
    w = w - np.floor(w + 0.5)
    u, s = w @ EU, w @ ES
    ell = math.log(LAM1)

    def rhs(t, z):
        q = psi_ref(z[0] ** 2 + z[1] ** 2, r0)
        return [direction * ell * z[0] * q, -direction * ell * z[1] * q]

    sol = solve_ivp(rhs, (0, 1), [u, s], method="DOP853", rtol=1e-13, atol=1e-16)
    u1, s1 = sol.y[:, -1]
    out = u1 * EU + s1 * ES
    return out - np.floor(out)


@pytest.fixture(scope="session")
def lin():
    return linear_cat()


@pytest.fixture(scope="session")
def neu():
    return neutral_cat()


@pytest.fixture(scope="session")
def params():
    return RegionParams()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for _, r in sorted(mod.RESULTS.items()):
        terminalreporter.write_line(r.line())
