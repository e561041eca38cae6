"""
Base class for incentive allocation policies.

Every policy evaluated on an environment (the learned actor as well as the reference
baselines) implements this interface, so rollouts treat them alike.
"""

from abc import ABC, abstractmethod

import numpy as np

from incentivizer.simenv import EnvState, StepLog


class IncentivePolicy(ABC):
    """
    Abstract base class for incentive allocation policies.

    A policy maps the current environment state and the per-step budget to one
    incentive offer per user. Learning policies update themselves in observe().
    """

    name = ''
    description = ''

    @abstractmethod
    def act(self, state: EnvState, budget: float) -> np.ndarray:
        """
        Choose the incentives for the next step.

        Args:
            state: Current environment state
            budget: Budget available for the step

        Returns:
            One offer per user, every entry in [0, 1]
        """

    def observe(self, log: StepLog) -> None:
        """
        Receive the outcome of the step just taken.

        Args:
            log: Step log produced by the environment
        """

    def reset(self) -> None:
        """Forget episode-specific state before a new rollout."""

    def get_policy_info(self) -> dict:
        return {'name': self.name, 'description': self.description}
