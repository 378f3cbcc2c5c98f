import numpy as np
import pytest

from scalarflat.geometry import ModelCap, build_glued_geometry


@pytest.fixture(scope="session")
def sym_geom():
    """Identical caps, eps = 2**-6, n = m = 3."""
    return build_glued_geometry(ModelCap(3, 1.0, 1), ModelCap(3, 1.0, 2), 2.0**-6)


@pytest.fixture(scope="session")
def asym_geom():
    """Lump volumes 1 and 2, eps = 2**-7, n = m = 3."""
    return build_glued_geometry(ModelCap(3, 1.0, 1), ModelCap(3, 2.0, 2), 2.0**-7)


@pytest.fixture(scope="session")
def geom4():
    """n = m = 4, eps = 2**-7, alpha fixed at 1."""
    return build_glued_geometry(ModelCap(4, 1.5, 1), ModelCap(4, 0.8, 2), 2.0**-7, alpha=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
