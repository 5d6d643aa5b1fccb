import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from vqfield import shapes  # noqa: E402
from vqfield.mesh import normalize  # noqa: E402
from vqfield.raycast import build_accel  # noqa: E402


@pytest.fixture(scope="session")
def cube():
    return shapes.cube()


@pytest.fixture(scope="session")
def cube_accel(cube):
    return build_accel(cube)


@pytest.fixture(scope="session")
def sphere3():
    return normalize(shapes.icosphere(3))


@pytest.fixture(scope="session")
def fixtures():
    return {k: normalize(m) for k, m in shapes.nonconvex_fixtures().items()}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=lambda k: int(k[1:])):
        terminalreporter.write_line(results[key][1])
