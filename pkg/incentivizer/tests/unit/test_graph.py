#!/usr/bin/env python3

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[3]))

import numpy as np
import pytest

from incentivizer.graph import (DirectedSocialNetwork, EdgeListError, SubnetworkError, adjacency_matrices,
                                assign_random_weights, degrees, extract_subnetwork, from_adjacency, influence_matrix,
                                load_edge_list, load_network, network_stats, normalize_incoming, save_network)


def test_load_compacts_ids_in_first_appearance_order(mini_test_dir):
    net = load_edge_list(mini_test_dir / 'chain.txt')
    assert net.node_count == 4
    assert net.labels == ('10', '20', '30', '40')
    assert [(s, t) for s, t, _ in net.edges()] == [(0, 1), (1, 2), (2, 0), (2, 3)]
    assert net.weights is None


def test_load_matrix_market_undirected(mini_test_dir):
    net = load_edge_list(mini_test_dir / 'star.mtx', directed=False)
    assert net.node_count == 6
    assert net.edge_count == 12
    stats = network_stats(net)
    assert (stats.nodes, stats.edges) == (6, 6)
    assert stats.avg_degree == pytest.approx(2.0)
    assert stats.summary() == '6 nodes, 6 undirected edges, avg degree 2.0'


def test_bad_line_reports_line_number(mini_test_dir):
    with pytest.raises(EdgeListError) as info:
        load_edge_list(mini_test_dir / 'bad-line.txt')
    assert info.value.line_number == 2
    assert 'line: 2' in str(info.value)


def test_self_loops_and_repeats_are_skipped(mini_test_dir):
    net = load_edge_list(mini_test_dir / 'loops.txt')
    assert net.node_count == 3
    assert net.edge_count == 2


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_edge_list('no/such/file.txt')


def test_adjacency_pair_is_transposed(mini_test_dir):
    net = load_edge_list(mini_test_dir / 'chain.txt')
    a_out, a_in = adjacency_matrices(net)
    assert a_out[2, 3] == 1.0 and a_out[3, 2] == 0.0
    np.testing.assert_array_equal(a_in, a_out.T)
    assert degrees(net, 2) == (1, 2)
    assert degrees(net, 3) == (1, 0)


def test_from_adjacency_is_lossless(mini_test_dir):
    net = load_edge_list(mini_test_dir / 'chain.txt')
    rebuilt = from_adjacency(adjacency_matrices(net).a_out)
    assert sorted(rebuilt.edges()) == sorted(net.edges())


def test_weights_respect_incoming_sum():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a_out = (rng.random((12, 12)) < 0.6).astype(float)
        np.fill_diagonal(a_out, 0.0)
        a_out[0, 1] = 1.0
        net = assign_random_weights(from_adjacency(a_out), int(rng.integers(1000)))
        assert np.all(net.weights > 0.0) and np.all(net.weights <= 1.0)
        incoming = np.bincount(net.targets, weights=net.weights, minlength=net.node_count)
        assert incoming.max() <= 1.0 + 1e-12


def test_normalize_incoming_rescales_only_overfull_nodes():
    targets = np.array([1, 1, 2])
    weights = normalize_incoming(targets, np.array([0.8, 0.7, 0.4]), 3)
    assert weights == pytest.approx([0.8 / 1.5, 0.7 / 1.5, 0.4])


def test_weights_are_seeded(mini_test_dir):
    net = load_edge_list(mini_test_dir / 'chain.txt')
    np.testing.assert_array_equal(assign_random_weights(net, 5).weights, assign_random_weights(net, 5).weights)
    assert not np.array_equal(assign_random_weights(net, 5).weights, assign_random_weights(net, 6).weights)


def test_influence_matrix_orientation(mini_test_dir):
    net = assign_random_weights(load_edge_list(mini_test_dir / 'chain.txt'), 1)
    w = influence_matrix(net)
    for src, dst, weight in net.edges():
        assert w[src, dst] == weight


def test_invalid_networks_are_rejected():
    with pytest.raises(ValueError):
        DirectedSocialNetwork(node_count=2, sources=np.array([0]), targets=np.array([0]))
    with pytest.raises(ValueError):
        DirectedSocialNetwork(node_count=2, sources=np.array([0, 0]), targets=np.array([1, 1]))
    with pytest.raises(ValueError):
        DirectedSocialNetwork(node_count=3, sources=np.array([0, 1]), targets=np.array([2, 2]),
                              weights=np.array([0.7, 0.6]))


def test_subnetwork_bfs(mini_test_dir):
    net = load_edge_list(mini_test_dir / 'star.mtx', directed=False)
    sub = extract_subnetwork(net, seed_node=1, target_size=3)
    assert sub.node_count == 3
    # node 1 (label 2) reaches the hub 0 and node 2 first
    assert sub.labels == ('1', '2', '3')
    assert network_stats(sub).edges == 3


def test_full_size_subnetwork_is_identity(mini_test_dir):
    net = load_edge_list(mini_test_dir / 'chain.txt')
    sub = extract_subnetwork(net, seed_node=3, target_size=net.node_count)
    assert sorted(sub.edges()) == sorted(net.edges())


def test_subnetwork_too_large():
    net = from_adjacency(np.array([[0, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 1], [0, 0, 0, 0]]))
    with pytest.raises(SubnetworkError) as info:
        extract_subnetwork(net, seed_node=0, target_size=3)
    assert info.value.achieved_size == 2


def test_network_dump_round_trip(tmp_path, mini_test_dir):
    net = assign_random_weights(load_edge_list(mini_test_dir / 'star.mtx', directed=False), 11)
    save_network(net, tmp_path / 'net.txt')
    loaded = load_network(tmp_path / 'net.txt')
    assert loaded.edges() == net.edges()
    assert loaded.directed is False
    assert network_stats(loaded) == network_stats(net)
