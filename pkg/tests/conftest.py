import math

import numpy as np
import pytest

from lagflow.domains import ConvexDomain
from lagflow.flow import build_grid

TAUS = [math.pi / 8, math.pi / 4, 3 * math.pi / 8, math.pi / 2]
TAU_IDS = ["log", "inverse", "arctan", "pure"]

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def disc():
    return ConvexDomain.disc()


@pytest.fixture(scope="session")
def disc_grid32(disc):
    return build_grid(disc, 1.0 / 32)


@pytest.fixture(scope="session")
def disc_grid16(disc):
    return build_grid(disc, 1.0 / 16)


def radial(x):
    return 0.5 * (x[..., 0] ** 2 + x[..., 1] ** 2)


def bump(amplitude, width=0.08):
    def u0(x):
        r2 = x[..., 0] ** 2 + x[..., 1] ** 2
        return 0.5 * r2 + amplitude * np.exp(-r2 / width)
    return u0


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
