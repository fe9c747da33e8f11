import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import bridgerates as br

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def symmetric_two():
    """Unit-rate two-state chain; most closed forms below are for this one."""
    return br.validate_generator([[-1.0, 1.0], [1.0, -1.0]])


@pytest.fixture(scope="session")
def lopsided_two():
    return br.validate_generator([[-2.0, 2.0], [1.0, -1.0]])


@pytest.fixture(scope="session")
def ring_three():
    return br.validate_generator(
        [
            [-1.2, 1.0, 0.2],
            [0.3, -1.3, 1.0],
            [1.0, 0.4, -1.4],
        ]
    )


def random_generator(rng: np.random.Generator, n: int) -> "br.GeneratorMatrix":
    """Random irreducible generator with all off-diagonal rates positive."""
    rates = rng.uniform(0.2, 2.0, (n, n))
    np.fill_diagonal(rates, 0.0)
    rates[np.diag_indices(n)] = -rates.sum(axis=1)
    return br.validate_generator(rates)
