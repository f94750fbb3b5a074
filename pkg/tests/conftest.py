from importlib.resources import files

import numpy as np
import pytest

from cogames.core import CardinalGame, cog_from_cardinal
from cogames.io import load_game

DATA = files("cogames") / "data"

ROCK, PAPER, SCISSORS = 0, 1, 2
SWERVE, STRAIGHT = 0, 1

# row player's payoffs; the column player's are the transpose
CHICKEN_ROW = np.array([[0.75, 0.5], [1.0, 0.0]])


def chicken_nfg():
    return CardinalGame((CHICKEN_ROW, CHICKEN_ROW.T.copy()))


def rps_nfg():
    a = np.array([[0, -1, 1], [1, 0, -1], [-1, 1, 0]], dtype=float)
    return CardinalGame((a, a.T.copy()))


@pytest.fixture
def chicken():
    return cog_from_cardinal(chicken_nfg())


@pytest.fixture
def rps():
    return cog_from_cardinal(rps_nfg())


@pytest.fixture
def agent_task():
    return load_game(DATA / "agent_task.json").cog


RPS_MIX = np.array([0.25, 0.30, 0.45])


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
