import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[2]))

from incentivizer.graph import DirectedSocialNetwork, from_adjacency
from incentivizer.simenv import generate_environment

MINI_TEST_DIR = Path(__file__).resolve().parents[1] / 'mini-test'


def random_network(rng: np.random.Generator, node_count: int, density: float = 0.35) -> DirectedSocialNetwork:
    a_out = (rng.random((node_count, node_count)) < density).astype(float)
    np.fill_diagonal(a_out, 0.0)
    if not a_out.any():
        a_out[0, 1] = 1.0
    return from_adjacency(a_out)


@pytest.fixture
def mini_test_dir() -> Path:
    return MINI_TEST_DIR


@pytest.fixture
def ring_env():
    """8-user directed ring with chords, 4 options."""
    sources = [0, 1, 2, 3, 4, 5, 6, 7, 0, 4]
    targets = [1, 2, 3, 4, 5, 6, 7, 0, 4, 0]
    net = DirectedSocialNetwork(node_count=8, sources=np.array(sources), targets=np.array(targets))
    return generate_environment(net, option_count=4, seed_env=7)


@pytest.fixture
def make_random_network():
    return random_network
