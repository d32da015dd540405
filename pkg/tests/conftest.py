import sys
from pathlib import Path

import pytest

from flatflow import load_surface
from flatflow.lambdas import LambdaConfig
from flatflow.saddles import build_concat_graph

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).resolve().parents[1] / "src" / "flatflow" / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def octagon():
    return load_surface(DATA / "octagon.surf")


@pytest.fixture(scope="session")
def lshape():
    return load_surface(DATA / "lshape.surf")


@pytest.fixture(scope="session")
def oct_graph6(octagon):
    return build_concat_graph(octagon, 6.0)


@pytest.fixture(scope="session")
def oct_graph12(octagon):
    return build_concat_graph(octagon, 12.0)


@pytest.fixture(scope="session")
def cfg(octagon):
    return LambdaConfig.default(octagon)


_CRITERIA: dict = {}


@pytest.fixture(scope="session")
def criterion_log():
    return _CRITERIA


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])
