"""
Rollout comparison for incentivizer.

Aggregates per-step metrics of several policies and environment seeds into
CSV tables.
"""

from .comparison import ComparisonAnalyzer, RolloutResult

__all__ = ['ComparisonAnalyzer', 'RolloutResult']
