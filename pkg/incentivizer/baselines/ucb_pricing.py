"""
UCB pricing baseline: an independent UCB1 bandit per user over a discrete price grid.

Each arm is a price in {0.00, 0.01, ..., 1.00}. An accepted offer (the user picks the
target option) earns 1 - price; a rejected offer earns 0.
"""

import logging

import numpy as np

from incentivizer.simenv import EnvState, StepLog
from .base_policy import IncentivePolicy

logger = logging.getLogger(__name__)

PRICE_COUNT = 101


class PricingBandit:
    """Per-user arm statistics: pull counts and mean rewards."""

    def __init__(self, user_count: int, price_count: int = PRICE_COUNT, exploration: float = np.sqrt(2.0)):
        if user_count < 1 or price_count < 2:
            raise ValueError(f'bandit needs users and at least two prices, got {user_count} x {price_count}')
        self.prices = np.linspace(0.0, 1.0, price_count)
        self.exploration = exploration
        self.counts = np.zeros((user_count, price_count), dtype=np.int64)
        self.means = np.zeros((user_count, price_count))
        self.last_arms: np.ndarray | None = None

    @property
    def user_count(self) -> int:
        return self.counts.shape[0]

    def select(self) -> np.ndarray:
        """Arm index per user: the first untried arm, otherwise the highest upper confidence bound."""
        pulls = self.counts.sum(axis=1, keepdims=True)
        tried = self.counts > 0
        with np.errstate(divide='ignore', invalid='ignore'):
            bonus = self.exploration * np.sqrt(np.log(np.maximum(pulls, 1)) / self.counts)
        scores = np.where(tried, self.means + bonus, np.inf)
        arms = np.argmax(scores, axis=1)
        self.last_arms = arms
        return arms

    def learn(self, arms: np.ndarray, accepted: np.ndarray) -> None:
        users = np.arange(self.user_count)
        rewards = np.where(accepted, 1.0 - self.prices[arms], 0.0)
        self.counts[users, arms] += 1
        n = self.counts[users, arms]
        self.means[users, arms] += (rewards - self.means[users, arms]) / n

    def modal_arms(self) -> np.ndarray:
        return np.argmax(self.counts, axis=1)


class UCBPricing(IncentivePolicy):
    name = 'ucb-pricing'
    description = 'UCB1 bandit per user over 101 discrete prices'

    def __init__(self, price_count: int = PRICE_COUNT, exploration: float = np.sqrt(2.0)):
        self.price_count = price_count
        self.exploration = exploration
        self.bandit: PricingBandit | None = None

    def reset(self) -> None:
        self.bandit = None

    def act(self, state: EnvState, budget: float) -> np.ndarray:
        if self.bandit is None or self.bandit.user_count != state.node_count:
            self.bandit = PricingBandit(state.node_count, self.price_count, self.exploration)
        return self.bandit.prices[self.bandit.select()]

    def observe(self, log: StepLog) -> None:
        if self.bandit is None or self.bandit.last_arms is None:
            return
        self.bandit.learn(self.bandit.last_arms, log.behaviors == log.target_option)
        logger.debug(f'ucb-pricing: {int(np.sum(log.behaviors == log.target_option))} offers accepted')
