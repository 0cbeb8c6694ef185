import numpy as np
import pytest

from cavsei.model import ModelParams


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_params(rng, **fixed) -> ModelParams:
    """Random but physically sensible parameter point in units of g_a."""
    kw = dict(
        kappa_a=rng.uniform(0.1, 0.5),
        Omega=rng.uniform(0.02, 0.3),
        Delta_a=rng.uniform(-3, 3),
        delta=rng.uniform(-2, 2),
        phi=rng.uniform(0, 2 * np.pi),
        V=rng.uniform(-2, 2),
        gamma=rng.uniform(0.05, 0.2),
        gamma_e=rng.uniform(0, 0.05),
    )
    kw.update(fixed)
    return ModelParams(**kw)
