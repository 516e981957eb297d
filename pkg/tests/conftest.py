import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from morseflow.surface import build_surface, morse_function

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def square32():
    s = build_surface("rectangle", 32, [1.0, 1.0])
    h, cat = morse_function(s, s.nearest_vertex([0.5, 0.5]), 0.01, seed=0)
    return s, h, cat


@pytest.fixture(scope="session")
def cylinder16():
    s = build_surface("cylinder", 16, [1.0, 1.6])
    h, cat = morse_function(s, s.nearest_vertex([0.5, 0.8]), 0.01, seed=0)
    return s, h, cat


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
