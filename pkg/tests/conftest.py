import math

import numpy as np
import pytest

from crystalgate.crystal import TrapConfig, equilibrium
from crystalgate.phonons import modes_for

W_XY = 2 * math.pi * 200e3


@pytest.fixture(scope="session")
def trap2():
    return TrapConfig(2, W_XY, 50 * W_XY)


@pytest.fixture(scope="session")
def crystal2(trap2):
    return equilibrium(trap2)


@pytest.fixture(scope="session")
def modes2(trap2, crystal2):
    return modes_for(trap2, crystal2)


@pytest.fixture(scope="session")
def axis2(crystal2):
    sep = crystal2.positions[1] - crystal2.positions[0]
    return tuple(sep / np.linalg.norm(sep))


@pytest.fixture(scope="session")
def trap147():
    return TrapConfig(147, W_XY, 50 * W_XY)


@pytest.fixture(scope="session")
def crystal147(trap147):
    return equilibrium(trap147)


@pytest.fixture(scope="session")
def modes147(trap147, crystal147):
    return modes_for(trap147, crystal147)


@pytest.fixture(scope="session")
def op_setup():
    from crystalgate import pipelines

    return pipelines.build_setup({})


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record ``(criterion, ok, detail)``; lines are printed in the terminal summary."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
