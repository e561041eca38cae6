"""
Comparison of policy rollouts.

This module collects per-step rollout metrics of several policies over several
environment seeds, aggregates them per policy and step, and exports the raw and
aggregated tables as CSV.
"""

from dataclasses import dataclass
import logging
from pathlib import Path
from typing import Dict, List

import pandas as pd

RAW_COLUMNS = ['policy', 'seed', 'step', 'engaged', 'spent', 'reward']
SUMMARY_COLUMNS = ['policy', 'step', 'mean_engaged', 'std_engaged', 'runs']


@dataclass
class RolloutResult:
    """Per-step metrics (step, engaged, spent, reward) of one policy on one environment seed."""
    policy: str
    seed: int
    metrics: pd.DataFrame


class ComparisonAnalyzer:
    """
    Analyzer for rollout results.

    This class aggregates rollouts of different policies and seeds into
    plot-ready tables.
    """

    def __init__(self):
        self.results: List[RolloutResult] = []
        self.logger = logging.getLogger(__name__)

    def add_results(self, results: List[RolloutResult]) -> None:
        """
        Add rollout results to the analyzer.

        Args:
            results: List of rollout results to add
        """
        self.results.extend(results)
        self.logger.info(f"Added {len(results)} rollouts to analyzer")

    def raw_table(self) -> pd.DataFrame:
        """
        One row per policy, seed and step.

        Returns:
            DataFrame with columns policy, seed, step, engaged, spent, reward
        """
        if not self.results:
            return pd.DataFrame(columns=RAW_COLUMNS)
        frames = [r.metrics.assign(policy=r.policy, seed=r.seed) for r in self.results]
        return pd.concat(frames, ignore_index=True)[RAW_COLUMNS]

    def aggregate_table(self) -> pd.DataFrame:
        """
        Mean and standard deviation of the engaged count per policy and step.

        The standard deviation is the population one, so a single run has std 0.

        Returns:
            DataFrame with columns policy, step, mean_engaged, std_engaged, runs
        """
        raw = self.raw_table()
        if raw.empty:
            return pd.DataFrame(columns=SUMMARY_COLUMNS)
        grouped = raw.groupby(['policy', 'step'], sort=False)['engaged']
        summary = grouped.agg(mean_engaged='mean', std_engaged=lambda s: s.std(ddof=0), runs='count')
        return summary.reset_index()[SUMMARY_COLUMNS]

    def final_window_summary(self, window: int = 50) -> Dict[str, float]:
        """
        Mean engaged count over the last window steps, averaged over seeds.

        Args:
            window: Number of trailing steps

        Returns:
            Dictionary mapping policy name to mean engaged users
        """
        raw = self.raw_table()
        summary = {}
        for policy, rows in raw.groupby('policy', sort=False):
            last_steps = rows['step'] > rows['step'].max() - window
            summary[policy] = float(rows.loc[last_steps, 'engaged'].mean())
        return summary

    def export(self, out_dir: str | Path) -> List[Path]:
        """
        Write compare_raw.csv and compare_summary.csv.

        Args:
            out_dir: Output directory (created if missing)

        Returns:
            Paths of the written files
        """
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        raw_path, summary_path = out_dir / 'compare_raw.csv', out_dir / 'compare_summary.csv'
        self.raw_table().to_csv(raw_path, index=False)
        self.aggregate_table().to_csv(summary_path, index=False)
        self.logger.info(f"Comparison exported to {out_dir}")
        return [raw_path, summary_path]
