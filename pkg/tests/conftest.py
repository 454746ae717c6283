from pathlib import Path

import pytest

from spath.envgen import SF1_SPEC, chain_floor, generate_checked, grid_floor, rf2_like
from spath.gridmap import load_rectangles
from spath.pipeline import setup
from spath.scenegraph import load_scene_graph

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def two_rooms():
    sg = load_scene_graph((DATA / "two_rooms.json").read_text())
    grid = load_rectangles(DATA / "two_rooms_rects.json")
    return sg, grid


@pytest.fixture(scope="session")
def two_rooms_env(two_rooms):
    return setup(*two_rooms)


@pytest.fixture(scope="session")
def chain3_env():
    return setup(*chain_floor(3))


@pytest.fixture(scope="session")
def square_env():
    """3x3 rooms with a doorway in every interior wall."""
    return setup(*grid_floor(3, 3, cross=[0, 1, 2], room=5.0))


@pytest.fixture(scope="session")
def rf2_env():
    return setup(*rf2_like())


@pytest.fixture(scope="session")
def sf1():
    return generate_checked(SF1_SPEC)


@pytest.fixture(scope="session")
def sf1_env(sf1):
    return setup(*sf1)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
