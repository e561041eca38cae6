"""
Uniform baseline: the budget is split evenly across all users.
"""

import numpy as np

from incentivizer.simenv import EnvState
from .base_policy import IncentivePolicy


def uniform(state: EnvState, budget: float) -> np.ndarray:
    """Offer every user min(budget / |V|, 1)."""
    if budget <= 0:
        raise ValueError(f'budget must be positive, got {budget}')
    return np.full(state.node_count, min(budget / state.node_count, 1.0))


class Uniform(IncentivePolicy):
    name = 'uniform'
    description = 'offers every user an equal share of the budget'

    def act(self, state: EnvState, budget: float) -> np.ndarray:
        return uniform(state, budget)
