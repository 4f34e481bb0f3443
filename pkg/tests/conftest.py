import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wermer.schedule import demo_schedule, from_values, unit_preset

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def demo():
    return demo_schedule()


@pytest.fixture(scope="session")
def unit():
    """eps_1 = 1, a_1 = 0: P_1 = w^2 - z."""
    return unit_preset(1)


@pytest.fixture(scope="session")
def small_n3():
    """A hand-made three-dimensional schedule with both directions used."""
    return from_values(
        eps=(0.4, 0.1, 0.02, 0.004),
        a=(0.0, 0.5j, 0.25, -0.5),
        n=3,
        directions=(1, 2, 1, 2),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
