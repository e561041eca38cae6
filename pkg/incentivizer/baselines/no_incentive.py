"""
No-Incentive baseline: users follow preferences and social influence only.
"""

import numpy as np

from incentivizer.simenv import EnvState
from .base_policy import IncentivePolicy


def no_incentive(state: EnvState) -> np.ndarray:
    return np.zeros(state.node_count)


class NoIncentive(IncentivePolicy):
    name = 'none'
    description = 'allocates no incentive at all'

    def act(self, state: EnvState, budget: float) -> np.ndarray:
        return no_incentive(state)
