import shutil
from pathlib import Path

import pytest

from lpctl.model import load_model

DATA = Path(__file__).parent / "data"

requires_solver = pytest.mark.skipif(shutil.which("z3") is None, reason="z3 not on PATH")


def bundled(name: str):
    return load_model((DATA / f"bundled-{name}.json").read_text())


@pytest.fixture
def left():
    return bundled("left")


@pytest.fixture
def middle():
    return bundled("middle")


@pytest.fixture
def right():
    return bundled("right")
