import numpy as np
import pytest
from hypothesis import settings

from spectropt.grid import GeneralizedPotential, GridSpec

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")


def random_pot(seed: int, d: int = 2, n: int = 9, L: float = 1.0, mask_frac: float = 0.3) -> GeneralizedPotential:
    """Rough random potential with a random mask that leaves at least one free node."""
    rng = np.random.default_rng(seed)
    grid = GridSpec(d, L, n)
    vfin = rng.uniform(0.0, 5.0, grid.shape)
    mask = rng.uniform(size=grid.shape) < mask_frac
    mask.flat[rng.integers(grid.size)] = False
    return GeneralizedPotential(grid, vfin, mask)


def random_field(pot: GeneralizedPotential, seed: int):
    from spectropt.grid import ScalarField

    rng = np.random.default_rng(seed)
    return ScalarField(pot.grid, rng.standard_normal(pot.grid.shape) * ~pot.inf_mask)


@pytest.fixture
def interval_grid():
    return GridSpec(1, 1.0, 255)


def pytest_terminal_summary(terminalreporter):
    import sys

    acc = sys.modules.get("test_acceptance")
    if acc is not None and acc.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(acc.RESULTS):
            terminalreporter.write_line(acc.RESULTS[n])
