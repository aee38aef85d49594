import numpy as np
import pytest

from monferm.gaussian import GaussianState, orthonormalize


def random_state(L: int, N: int, rng: np.random.Generator) -> GaussianState:
    """Haar-ish random pure Gaussian state at the given filling."""
    raw = rng.normal(size=(L, N)) + 1j * rng.normal(size=(L, N))
    return GaussianState(u=orthonormalize(raw), t=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
