#!/usr/bin/env python3

"""
Checks against the public Dolphins and Wiki-Vote networks.

The files are not shipped; set INCENTIVIZER_DATA_DIR to a directory holding
soc-dolphins.mtx (or dolphins.txt) and soc-wiki-Vote.mtx (or wiki-vote.txt).
"""

import os
import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[3]))

import numpy as np
import pytest

from incentivizer.graph import load_edge_list, network_stats
from incentivizer.policy import ActorNet, actor_forward, rescale_action
from incentivizer.simenv import generate_environment

DATA_DIR = Path(os.environ.get('INCENTIVIZER_DATA_DIR', ''))


def dataset(*names: str) -> Path | None:
    if not os.environ.get('INCENTIVIZER_DATA_DIR'):
        return None
    return next((DATA_DIR / name for name in names if (DATA_DIR / name).exists()), None)


DOLPHINS = dataset('soc-dolphins.mtx', 'dolphins.txt')
WIKI_VOTE = dataset('soc-wiki-Vote.mtx', 'wiki-vote.txt')

needs_dolphins = pytest.mark.skipif(DOLPHINS is None, reason='Dolphins network not found in INCENTIVIZER_DATA_DIR')
needs_wiki_vote = pytest.mark.skipif(WIKI_VOTE is None, reason='Wiki-Vote network not found in INCENTIVIZER_DATA_DIR')


@needs_dolphins
def test_dolphins_stats():
    stats = network_stats(load_edge_list(DOLPHINS, directed=False))
    assert (stats.nodes, stats.edges) == (62, 159)
    assert stats.avg_degree == pytest.approx(5.1, abs=0.05)
    assert stats.summary() == '62 nodes, 159 undirected edges, avg degree 5.1'


@needs_wiki_vote
def test_wiki_vote_stats():
    stats = network_stats(load_edge_list(WIKI_VOTE))
    assert (stats.nodes, stats.edges) == (889, 2914)
    assert stats.avg_degree == pytest.approx(6.6, abs=0.05)


@needs_dolphins
def test_dolphins_budget_is_never_exceeded():
    env = generate_environment(load_edge_list(DOLPHINS, directed=False), seed_env=42)
    rng = np.random.default_rng(0)
    env.reset()
    for _ in range(10_000):
        log, _ = env.step(rng.random(env.node_count), 3.0)
        assert log.charged.sum() <= 3.0 + 1e-9
        assert log.spent <= 3.0 + 1e-9


@needs_dolphins
def test_dolphins_shape_pipeline():
    env = generate_environment(load_edge_list(DOLPHINS, directed=False), seed_env=42)
    actor = ActorNet(env.node_count, env.option_count, np.random.default_rng(0))
    for encoder in actor.encoders.values():
        assert encoder.cluster_pipeline(env.node_count) == (62, 16, 1)
        assert encoder.embed_dim == 32
    action = actor_forward(env.reset(), actor)
    assert action.shape == (62,)
    assert np.all(np.abs(action) <= 1.0)
    assert np.all((rescale_action(action) >= 0.0) & (rescale_action(action) <= 1.0))
