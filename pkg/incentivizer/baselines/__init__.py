"""
Reference incentive policies.

Each policy implements IncentivePolicy; make_policy() builds one by name.
"""

from .base_policy import IncentivePolicy
from .no_incentive import NoIncentive, no_incentive
from .uniform import Uniform, uniform
from .ucb_pricing import PricingBandit, UCBPricing

BASELINES = {
    NoIncentive.name: NoIncentive,
    Uniform.name: Uniform,
    UCBPricing.name: UCBPricing,
}


def make_policy(name: str) -> IncentivePolicy:
    if name not in BASELINES:
        raise ValueError(f'unknown baseline policy {name} (known: {", ".join(BASELINES)})')
    return BASELINES[name]()


__all__ = [
    'IncentivePolicy',
    'NoIncentive',
    'Uniform',
    'UCBPricing',
    'PricingBandit',
    'BASELINES',
    'make_policy',
    'no_incentive',
    'uniform',
]
