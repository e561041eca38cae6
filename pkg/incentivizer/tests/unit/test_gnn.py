#!/usr/bin/env python3

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[3]))

import numpy as np
import pytest

from incentivizer.gnn import DiffPoolLayer, GraphSageLayer, diffpool_forward, graphsage_forward
from incentivizer.tensor import ShapeError, Tensor, gradients, numerical_gradient, sum_all


def sage(input_dim, output_dim, seed=0, activation=True):
    return GraphSageLayer(input_dim, output_dim, np.random.default_rng(seed), activation=activation)


def test_zero_input_gives_zero_output():
    layer = sage(3, 5)
    out = graphsage_forward(np.ones((4, 4)) - np.eye(4), np.zeros((4, 3)), layer)
    np.testing.assert_array_equal(out.data, np.zeros((4, 5)))


def test_two_node_hand_example():
    layer = sage(1, 2)
    layer.weight.data = np.array([[1.0, -1.0], [0.5, 2.0]])
    adj = np.array([[0.0, 1.0], [0.0, 0.0]])
    out = graphsage_forward(adj, np.array([[1.0], [2.0]]), layer)
    # node 0 aggregates node 1; node 1 has no neighbours
    np.testing.assert_allclose(out.data, [[2.0, 3.0], [2.0, 0.0]])


def test_without_activation_keeps_negative_values():
    layer = sage(1, 2, activation=False)
    layer.weight.data = np.array([[1.0, -1.0], [0.5, 2.0]])
    out = graphsage_forward(np.zeros((1, 1)), np.array([[2.0]]), layer)
    np.testing.assert_allclose(out.data, [[2.0, -2.0]])


def test_graphsage_is_permutation_equivariant():
    rng = np.random.default_rng(4)
    adj = (rng.random((6, 6)) < 0.5).astype(float)
    x = rng.normal(size=(6, 3))
    layer = sage(3, 4, seed=9)
    perm = rng.permutation(6)
    p = np.eye(6)[perm]
    out = graphsage_forward(adj, x, layer).data
    permuted = graphsage_forward(p @ adj @ p.T, p @ x, layer).data
    np.testing.assert_allclose(permuted, p @ out, atol=1e-12)


def test_graphsage_shape_errors():
    layer = sage(3, 4)
    with pytest.raises(ShapeError):
        graphsage_forward(np.ones((3, 4)), np.ones((3, 3)), layer)
    with pytest.raises(ShapeError):
        graphsage_forward(np.ones((3, 3)), np.ones((3, 2)), layer)
    with pytest.raises(ShapeError):
        graphsage_forward(np.ones((3, 3)), np.ones((4, 3)), layer)


def test_assignment_rows_sum_to_one():
    rng = np.random.default_rng(1)
    layer = DiffPoolLayer(3, 4, clusters=5, rng=rng)
    result = layer(np.ones((8, 8)) - np.eye(8), rng.normal(size=(8, 3)))
    assert result.assignment.shape == (8, 5)
    np.testing.assert_allclose(result.assignment.data.sum(axis=1), np.ones(8), atol=1e-12)
    assert result.adjacency.shape == (5, 5)
    assert result.embeddings.shape == (5, 4)


def test_single_cluster_gives_graph_embedding():
    rng = np.random.default_rng(2)
    adj = (rng.random((6, 6)) < 0.5).astype(float)
    x = rng.normal(size=(6, 3))
    layer = DiffPoolLayer(3, 4, clusters=1, rng=rng)
    coarse_adj, coarse_x = diffpool_forward(adj, x, layer)
    assert coarse_adj.shape == (1, 1) and coarse_x.shape == (1, 4)
    np.testing.assert_allclose(coarse_adj.data, [[adj.sum()]])
    np.testing.assert_allclose(coarse_x.data, layer.embed(adj, x).data.sum(axis=0, keepdims=True))


def test_identity_assignment_is_a_no_op():
    rng = np.random.default_rng(3)
    adj = (rng.random((4, 4)) < 0.5).astype(float)
    x = rng.normal(size=(4, 2))
    layer = DiffPoolLayer(2, 3, clusters=4, rng=rng)
    coarse_adj, coarse_x = diffpool_forward(adj, x, layer, assignment=np.eye(4))
    np.testing.assert_allclose(coarse_adj.data, adj)
    np.testing.assert_allclose(coarse_x.data, layer.embed(adj, x).data)


def test_hand_assignment_products():
    adj = np.array([[0, 1, 1, 0], [1, 0, 0, 0], [0, 0, 0, 1], [1, 0, 1, 0]], dtype=float)
    v = np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0], [0.25, 0.75]])
    x = np.arange(8, dtype=float).reshape(4, 2)
    layer = DiffPoolLayer(2, 2, clusters=2, rng=np.random.default_rng(0))
    layer.embed.weight.data = np.vstack([np.eye(2), np.zeros((2, 2))])  # Y = relu(x)
    coarse_adj, coarse_x = diffpool_forward(adj, x, layer, assignment=v)
    np.testing.assert_allclose(coarse_x.data, v.T @ x)
    np.testing.assert_allclose(coarse_adj.data, v.T @ adj @ v)


def test_diffpool_gradients():
    rng = np.random.default_rng(5)
    adj = (rng.random((5, 5)) < 0.5).astype(float)
    x = rng.normal(size=(5, 3))
    layer = DiffPoolLayer(3, 2, clusters=2, rng=rng)
    probe = rng.normal(size=(2, 2))

    def loss():
        result = layer(adj, x)
        return sum_all(result.embeddings * probe) + sum_all(result.adjacency * probe)

    params = list(layer.named_parameters().values())
    for param, grad in zip(params, gradients(loss(), params)):
        numeric = numerical_gradient(lambda: loss().item(), param)
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-7)


def test_batched_forward_matches_single():
    rng = np.random.default_rng(6)
    adj = (rng.random((5, 5)) < 0.5).astype(float)
    xs = rng.normal(size=(3, 5, 2))
    layer = DiffPoolLayer(2, 4, clusters=3, rng=rng)
    batched = layer(adj, Tensor(xs)).embeddings.data
    for i in range(3):
        np.testing.assert_allclose(batched[i], layer(adj, xs[i]).embeddings.data, atol=1e-12)
