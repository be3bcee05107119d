import numpy as np
import pytest

from gmfilter.increments import IncrementSpec
from gmfilter.spectral import SpectralDensityGrid, from_increment_density


def toy_spec(T=1):
    return IncrementSpec.from_lists([1], period=T)


@pytest.fixture
def toy():
    """T=1, spec (1-B), white increments sigma1^2 = 1, white noise sigma2^2 = 0.25."""
    spec = toy_spec()
    M = 1024
    f = from_increment_density(spec, SpectralDensityGrid.constant(np.eye(1) / (2 * np.pi), M))
    g = SpectralDensityGrid.constant(0.25 * np.eye(1) / (2 * np.pi), M)
    return spec, f, g, [1.0, 0.5, 0.25]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: s.split("criterion ")[1]):
            terminalreporter.write_line(line)
