from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from convframelets.pgm import load_pgm

DATA = Path(__file__).parent / "data"

# fixed 96x96 windows used by the desk-scale inpainting checks
DESK_CROPS = {
    "barbara": ("barbara256.pgm", (slice(100, 196), slice(40, 136))),
    "camera": ("camera256.pgm", (slice(40, 136), slice(90, 186))),
    "astronaut": ("astronaut256.pgm", (slice(60, 156), slice(80, 176))),
}


def load_image(name):
    return load_pgm(DATA / name)


def desk_crop(key):
    fname, window = DESK_CROPS[key]
    return load_image(fname)[window]


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def barbara128():
    return load_image("barbara128.pgm")


settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
