import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dcecav import RESONANT, DISPERSIVE, InitialLadderState, NumericsConfig  # noqa: E402
from dcecav.experiments import run_comparison  # noqa: E402

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def numerics():
    return NumericsConfig()


@pytest.fixture(scope="session")
def resonant_series(numerics):
    return run_comparison(RESONANT, InitialLadderState(), numerics, t_grid=np.arange(0, 2001) * 0.1)


@pytest.fixture(scope="session")
def dispersive_series(numerics):
    return run_comparison(DISPERSIVE, InitialLadderState(), numerics, t_grid=np.arange(0, 1001) * 0.1)
