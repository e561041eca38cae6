"""
Actor and critic networks of the graph actor-critic.

Each network owns one graph encoder per adjacency branch (in and/or out). An encoder
embeds the nodes with GraphSage, pools them into clusters with DiffPool, refines the
clusters with a second GraphSage and pools them once more into a single graph embedding.
The graph embedding multiplied by the node embeddings gives one normalised score per user;
the branch scores feed a fully connected head.
"""

from __future__ import annotations
from enum import Enum
import logging
from typing import Dict, List, Mapping, Tuple

import numpy as np

from incentivizer.gnn import DiffPoolLayer, GraphSageLayer
from incentivizer.simenv import EnvState
from incentivizer.tensor import (ShapeError, Tensor, as_tensor, l2_normalize_row, matmul, no_grad, parameter, relu,
                                 row_concat, tanh, transpose)

logger = logging.getLogger(__name__)

EMBED_DIM = 32
CLUSTERS = 16
HIDDEN_DIM = 64


class Variant(Enum):
    """Which adjacency branches the networks read"""
    GAC = 'gac'          # in and out
    GAC_IN = 'gac-in'    # in-adjacency only
    GAC_OUT = 'gac-out'  # out-adjacency only

    def __str__(self):
        return self.value

    @property
    def branches(self) -> Tuple[str, ...]:
        return {Variant.GAC: ('in', 'out'), Variant.GAC_IN: ('in',), Variant.GAC_OUT: ('out',)}[self]


class Dense:
    """Fully connected layer x @ W + b."""

    def __init__(self, input_dim: int, output_dim: int, rng: np.random.Generator, name: str):
        self.weight = parameter(input_dim, output_dim, rng, name=f'{name}.weight')
        self.bias = parameter(1, output_dim, rng, fan_in=input_dim, name=f'{name}.bias')

    def named_parameters(self) -> Dict[str, Tensor]:
        return {self.weight.name: self.weight, self.bias.name: self.bias}

    def __call__(self, x) -> Tensor:
        return matmul(x, self.weight) + self.bias


class GraphEncoder:
    def __init__(self, feature_dim: int, rng: np.random.Generator, name: str, embed_dim: int = EMBED_DIM,
                 clusters: int = CLUSTERS):
        self.feature_dim = feature_dim
        self.embed_dim = embed_dim
        self.clusters = clusters
        self.node_sage = GraphSageLayer(feature_dim, embed_dim, rng, name=f'{name}.sage1')
        self.cluster_pool = DiffPoolLayer(embed_dim, embed_dim, clusters, rng, name=f'{name}.pool1')
        self.cluster_sage = GraphSageLayer(embed_dim, embed_dim, rng, name=f'{name}.sage2')
        self.graph_pool = DiffPoolLayer(embed_dim, embed_dim, 1, rng, name=f'{name}.pool2')

    def cluster_pipeline(self, node_count: int) -> Tuple[int, int, int]:
        return node_count, self.clusters, 1

    def named_parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for layer in (self.node_sage, self.cluster_pool, self.cluster_sage, self.graph_pool):
            params.update(layer.named_parameters())
        return params

    def __call__(self, adj, features) -> Tuple[Tensor, Tensor]:
        """Returns (graph embedding 1×d, node embeddings n×d)."""
        node_embs = self.node_sage(adj, features)
        coarse = self.cluster_pool(adj, node_embs)
        refined = self.cluster_sage(coarse.adjacency, coarse.embeddings)
        graph = self.graph_pool(coarse.adjacency, refined)
        return graph.embeddings, node_embs


def combine_embeddings(graph_emb, node_embs) -> Tensor:
    """One score per node: graph_emb · node_embsᵀ, L2-normalised (a zero product stays zero)."""
    graph_emb, node_embs = as_tensor(graph_emb), as_tensor(node_embs)
    if graph_emb.cols != node_embs.cols:
        raise ShapeError('combine_embeddings', graph_emb.shape, node_embs.shape)
    return l2_normalize_row(matmul(graph_emb, transpose(node_embs)))


class _GraphNet:
    """Shared plumbing of the actor and critic: encoders per branch, a head, named parameters."""
    head_extra = 0
    head_width = 1

    def __init__(self, node_count: int, option_count: int, rng: np.random.Generator, variant: Variant, name: str,
                 embed_dim: int = EMBED_DIM, clusters: int = CLUSTERS):
        if node_count < 1:
            raise ValueError(f'network needs at least one node, got {node_count}')
        self.node_count = node_count
        self.option_count = option_count
        self.variant = variant
        self.name = name
        self.embed_dim = embed_dim
        self.clusters = clusters
        self.encoders = {branch: GraphEncoder(1 + option_count, rng, f'{name}.{branch}', embed_dim, clusters)
                         for branch in variant.branches}
        head_in = (len(self.encoders) + self.head_extra) * node_count
        self.head = [Dense(head_in, HIDDEN_DIM, rng, f'{name}.fc1'),
                     Dense(HIDDEN_DIM, HIDDEN_DIM, rng, f'{name}.fc2'),
                     Dense(HIDDEN_DIM, self.head_width, rng, f'{name}.fc3')]

    def __repr__(self):
        return f'{type(self).__name__}({self.name}, |V|={self.node_count}, variant={self.variant})'

    def named_parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for encoder in self.encoders.values():
            params.update(encoder.named_parameters())
        for layer in self.head:
            params.update(layer.named_parameters())
        return params

    def parameters(self) -> List[Tensor]:
        return list(self.named_parameters().values())

    def load_parameters(self, values: Mapping[str, np.ndarray], prefix: str | None = None) -> None:
        """Copy values (keyed by parameter name, optionally under another network prefix) into this network."""
        prefix = self.name if prefix is None else prefix
        for name, param in self.named_parameters().items():
            key = prefix + name[len(self.name):]
            if key not in values:
                raise KeyError(f'no value for parameter {key}')
            value = np.asarray(values[key], dtype=np.float64)
            if value.shape != param.shape:
                raise ShapeError(f'load {key}', param.shape, value.shape)
            param.data = value.copy()

    def clone(self, name: str | None = None):
        copy = type(self)(self.node_count, self.option_count, np.random.default_rng(0), self.variant,
                          name or self.name, embed_dim=self.embed_dim, clusters=self.clusters)
        copy.load_parameters({n: p.data for n, p in self.named_parameters().items()}, prefix=self.name)
        return copy

    def _scores(self, a_in, a_out, features) -> List[Tensor]:
        features = as_tensor(features)
        if features.rows != self.node_count or features.cols != 1 + self.option_count:
            raise ShapeError(f'{self.name} features', features.shape, (self.node_count, 1 + self.option_count))
        adjacency = {'in': a_in, 'out': a_out}
        scores = []
        for branch, encoder in self.encoders.items():
            graph_emb, node_embs = encoder(adjacency[branch], features)
            scores.append(combine_embeddings(graph_emb, node_embs))
        return scores

    def _head(self, x) -> Tensor:
        for layer in self.head[:-1]:
            x = relu(layer(x))
        return self.head[-1](x)


class ActorNet(_GraphNet):
    @property
    def head_width(self) -> int:
        return self.node_count

    def __init__(self, node_count: int, option_count: int, rng: np.random.Generator, variant: Variant = Variant.GAC,
                 name: str = 'actor', **kwargs):
        super().__init__(node_count, option_count, rng, variant, name, **kwargs)

    def forward(self, a_in, a_out, features) -> Tensor:
        """Actions in [-1, 1], shape (..., 1, |V|)."""
        return tanh(self._head(row_concat(*self._scores(a_in, a_out, features))))


class CriticNet(_GraphNet):
    head_extra = 1

    def __init__(self, node_count: int, option_count: int, rng: np.random.Generator, variant: Variant = Variant.GAC,
                 name: str = 'critic', **kwargs):
        super().__init__(node_count, option_count, rng, variant, name, **kwargs)

    def forward(self, a_in, a_out, features, action) -> Tensor:
        """Q values, shape (..., 1, 1)."""
        action = as_tensor(action)
        if action.cols != self.node_count:
            raise ShapeError(f'{self.name} action', action.shape, (1, self.node_count))
        return self._head(row_concat(*self._scores(a_in, a_out, features), action))


def _check_state(state: EnvState, net: _GraphNet) -> None:
    if state.node_count != net.node_count:
        raise ValueError(f'state has {state.node_count} users, {net.name} expects {net.node_count}')


def actor_forward(state: EnvState, net: ActorNet) -> np.ndarray:
    _check_state(state, net)
    with no_grad():
        return net.forward(state.a_in, state.a_out, state.features).data.reshape(-1)


def critic_forward(state: EnvState, action, net: CriticNet) -> float:
    _check_state(state, net)
    action = np.asarray(action, dtype=np.float64).reshape(1, -1)
    with no_grad():
        return net.forward(state.a_in, state.a_out, state.features, action).item()


def rescale_action(a) -> np.ndarray:
    return (np.asarray(a, dtype=np.float64) + 1.0) / 2.0
