import sys

import mpmath
import pytest

from hmink.profiles import SpaceForm

mpmath.mp.dps = 40


@pytest.fixture
def h3():
    return SpaceForm(-1.0)


def mp_sphere(r, a):
    """(V, S, M) of the geodesic r-sphere in H^3(a), evaluated in mpmath."""
    r = mpmath.mpf(r)
    if a == 0:
        return (4 * mpmath.pi * r ** 3 / 3, 4 * mpmath.pi * r ** 2, 8 * mpmath.pi * r)
    c = mpmath.sqrt(-mpmath.mpf(a))
    V = 4 * mpmath.pi * mpmath.quad(lambda t: mpmath.sinh(c * t) ** 2, [0, r]) / c ** 2
    S = 4 * mpmath.pi * mpmath.sinh(c * r) ** 2 / c ** 2
    M = 8 * mpmath.pi * mpmath.sinh(c * r) * mpmath.cosh(c * r) / c
    return V, S, M


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "SUMMARY", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
