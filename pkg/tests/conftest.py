import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", deadline=None, derandomize=True, max_examples=100)
settings.load_profile("ci")


@pytest.fixture
def tiny_world_config():
    from epicontrol.world import WorldConfig

    return WorldConfig(
        n_areas=4,
        population=30,
        initial_seed_count=2,
        horizon_days=12,
        rng_seed=5,
    )


def make_actions(m, code=0):
    return np.full(m, code, dtype=np.int8)
