import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hartree_lab.spectral import Field, make_grid

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def gaussian(grid, sigma=1.0, center=None, momentum=None, amplitude=1.0):
    center = center or [0.0] * grid.d
    momentum = momentum or [0.0] * grid.d

    def fn(*x):
        r2 = sum((c - c0) ** 2 for c, c0 in zip(x, center))
        return amplitude * np.exp(-r2 / (2 * sigma**2) + 1j * sum(k * c for k, c in zip(momentum, x)))

    return Field.from_function(grid, fn)


def random_field(grid, rng, band=None):
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    if band is not None:
        c = c * (grid.abs_xi <= band)
    return Field(grid, c, "frequency").to_physical()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def grid1():
    return make_grid(1, 64, 20.0)


# acceptance verdicts, printed once at the end of the session
VERDICTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(VERDICTS, key=lambda k: (int(k.rstrip("abc")), k)):
        terminalreporter.write_line(VERDICTS[key])
