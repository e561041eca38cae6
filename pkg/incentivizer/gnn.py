"""
Graph layers over (adjacency, node-embedding) pairs: mean-aggregator GraphSage and
differentiable pooling (DiffPool).

Embeddings are row-major: a graph with n nodes and d features per node is an n×d
tensor, optionally with a leading batch axis. Weights multiply from the right.
"""

from __future__ import annotations
import logging
from typing import Dict, NamedTuple

import numpy as np

from incentivizer.tensor import (ShapeError, Tensor, as_tensor, matmul, mean_aggregate, parameter, relu,
                                 row_concat, row_softmax, transpose)

logger = logging.getLogger(__name__)


class GraphSageLayer:
    """One-hop GraphSage with the mean aggregator.

    Row i of the output is relu(concat(x_i, mean of the neighbours selected by adj row i) @ W);
    an empty adjacency row aggregates to the zero vector."""

    def __init__(self, input_dim: int, output_dim: int, rng: np.random.Generator, activation: bool = True,
                 name: str = 'sage'):
        if input_dim < 1 or output_dim < 1:
            raise ValueError(f'GraphSage dimensions must be positive, got {input_dim} -> {output_dim}')
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.activation = activation
        self.name = name
        self.weight = parameter(2 * input_dim, output_dim, rng, name=f'{name}.weight')

    def __repr__(self):
        return f'GraphSageLayer({self.input_dim} -> {self.output_dim}, activation={self.activation})'

    def named_parameters(self) -> Dict[str, Tensor]:
        return {self.weight.name: self.weight}

    def __call__(self, adj, x) -> Tensor:
        return graphsage_forward(adj, x, self)


def graphsage_forward(adj, x, layer: GraphSageLayer) -> Tensor:
    adj, x = as_tensor(adj), as_tensor(x)
    if adj.rows != adj.cols or x.rows != adj.rows:
        raise ShapeError('graphsage', adj.shape, x.shape)
    if x.cols != layer.input_dim:
        raise ShapeError(f'graphsage {layer.name}', x.shape, layer.weight.shape)
    neighbourhood = mean_aggregate(adj, x)
    out = matmul(row_concat(x, neighbourhood), layer.weight)
    return relu(out) if layer.activation else out


class PoolResult(NamedTuple):
    adjacency: Tensor
    embeddings: Tensor
    assignment: Tensor


class DiffPoolLayer:
    """Coarsens n nodes into a fixed number of clusters.

    An embed GraphSage produces node embeddings Y; a pool GraphSage produces assignment logits,
    normalised per row with a softmax into V. The coarse graph is (Vᵀ·adj·V, Vᵀ·Y)."""

    def __init__(self, input_dim: int, output_dim: int, clusters: int, rng: np.random.Generator,
                 name: str = 'pool'):
        if clusters < 1:
            raise ValueError(f'DiffPool needs at least one cluster, got {clusters}')
        self.clusters = clusters
        self.name = name
        self.embed = GraphSageLayer(input_dim, output_dim, rng, activation=True, name=f'{name}.embed')
        self.pool = GraphSageLayer(input_dim, clusters, rng, activation=False, name=f'{name}.assign')

    def __repr__(self):
        return f'DiffPoolLayer({self.embed.input_dim} -> {self.embed.output_dim}, clusters={self.clusters})'

    def named_parameters(self) -> Dict[str, Tensor]:
        return {**self.embed.named_parameters(), **self.pool.named_parameters()}

    def assignment(self, adj, x) -> Tensor:
        return row_softmax(self.pool(adj, x))

    def __call__(self, adj, x, assignment=None) -> PoolResult:
        adj, x = as_tensor(adj), as_tensor(x)
        embeddings = self.embed(adj, x)
        v = self.assignment(adj, x) if assignment is None else as_tensor(assignment)
        if v.rows != adj.rows:
            raise ShapeError(f'diffpool {self.name} assignment', v.shape, adj.shape)
        v_t = transpose(v)
        return PoolResult(adjacency=matmul(matmul(v_t, adj), v), embeddings=matmul(v_t, embeddings), assignment=v)


def diffpool_forward(adj, x, layer: DiffPoolLayer, assignment=None):
    """Returns the coarsened (adjacency, embeddings) pair; assignment overrides the learned one."""
    result = layer(adj, x, assignment=assignment)
    return result.adjacency, result.embeddings
