import numpy as np
import pytest
from hypothesis import settings

from cwt2.spectral_noise import PeriodicGrid, SpatialCovariance

settings.register_profile("default", deadline=None, max_examples=30)
settings.load_profile("default")


@pytest.fixture
def grid8():
    return PeriodicGrid(box_length=4.0, points_per_axis=8, dt=0.05, n_steps=10)


@pytest.fixture
def grid16():
    return PeriodicGrid(box_length=4.0, points_per_axis=16, dt=1 / 32, n_steps=32)


@pytest.fixture
def cov1():
    return SpatialCovariance(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Print and keep a one-line PASS/FAIL summary; returns ``ok`` for asserting."""

    def record(label, ok, detail):
        line = f"{label}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
