#!/usr/bin/env python3

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[3]))

import pandas as pd
import pytest

from incentivizer.evaluation import ComparisonAnalyzer, RolloutResult


def rollout(policy, seed, engaged):
    steps = range(1, len(engaged) + 1)
    return RolloutResult(policy, seed, pd.DataFrame({'step': list(steps), 'engaged': engaged,
                                                     'spent': [0.5] * len(engaged), 'reward': [1.0] * len(engaged)}))


@pytest.fixture
def analyzer():
    analyzer = ComparisonAnalyzer()
    analyzer.add_results([rollout('gac', 1, [2, 4, 6]), rollout('gac', 2, [4, 6, 8]), rollout('none', 1, [1, 1, 1])])
    return analyzer


def test_raw_table(analyzer):
    raw = analyzer.raw_table()
    assert raw.columns.tolist() == ['policy', 'seed', 'step', 'engaged', 'spent', 'reward']
    assert len(raw) == 9


def test_aggregate_uses_population_std(analyzer):
    summary = analyzer.aggregate_table().set_index(['policy', 'step'])
    assert summary.loc[('gac', 1), 'mean_engaged'] == 3.0
    assert summary.loc[('gac', 1), 'std_engaged'] == 1.0
    assert summary.loc[('gac', 3), 'runs'] == 2
    assert summary.loc[('none', 2), 'std_engaged'] == 0.0


def test_final_window(analyzer):
    assert analyzer.final_window_summary(window=2) == {'gac': pytest.approx(6.0), 'none': 1.0}
    assert analyzer.final_window_summary(window=50)['gac'] == pytest.approx(5.0)


def test_export(analyzer, tmp_path):
    paths = analyzer.export(tmp_path / 'out')
    assert [p.name for p in paths] == ['compare_raw.csv', 'compare_summary.csv']
    assert len(pd.read_csv(paths[1])) == 6


def test_empty_analyzer():
    analyzer = ComparisonAnalyzer()
    assert analyzer.raw_table().empty
    assert analyzer.aggregate_table().columns.tolist() == ['policy', 'step', 'mean_engaged', 'std_engaged', 'runs']
