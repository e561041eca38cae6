"""
Directed social networks: edge-list loading, influence weights, adjacency matrices,
degrees and breadth-first sub-networks.

Node ids are contiguous integers 0..|V|-1 assigned in first-appearance order.
Undirected datasets are expanded into pairs of directed edges for simulation,
while statistics report the undirected pair count.
"""

from __future__ import annotations
from dataclasses import dataclass, replace
from functools import cached_property
from itertools import islice
import logging
from pathlib import Path
from typing import Iterable, Iterator, List, NamedTuple, TextIO, Tuple

import networkx as nx
import numpy as np
import regex

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOLERANCE = 1e-12
NUMBER_FORMAT = '.17g'  # enough significant digits for an exact float round-trip

EDGE_LINE_RE = regex.compile(r'\s*([+-]?\d+)\s+([+-]?\d+)(?:\s+\S+)*\s*')
DUMP_HEADER_RE = regex.compile(r'\s*(\d+)\s+(\d+)\s+([01])\s*')
DUMP_EDGE_RE = regex.compile(r'\s*(\d+)\s+(\d+)(?:\s+(\S+))?\s*')


class EdgeListError(ValueError):
    """Malformed edge-list or network-dump input."""

    def __init__(self, message: str, filename: str | Path | None = None, line_number: int | None = None):
        location = ''
        if line_number is not None:
            location += f' line: {line_number}'
        if filename is not None:
            location += f' file: {filename}'
        super().__init__(message + (f' ({location.strip()})' if location else ''))
        self.filename = filename
        self.line_number = line_number


class SubnetworkError(ValueError):
    def __init__(self, message: str, achieved_size: int):
        super().__init__(message)
        self.achieved_size = achieved_size


class AdjacencyPair(NamedTuple):
    a_out: np.ndarray
    a_in: np.ndarray


class NetworkStats(NamedTuple):
    nodes: int
    edges: int
    avg_degree: float
    directed: bool

    def summary(self) -> str:
        kind = 'edges' if self.directed else 'undirected edges'
        return f'{self.nodes} nodes, {self.edges} {kind}, avg degree {self.avg_degree:.1f}'


@dataclass(frozen=True, eq=False)
class DirectedSocialNetwork:
    """A directed network with optional influence weights w_ij on every edge i->j.

    Arrays are made read-only on construction; derive modified networks with
    dataclasses.replace (see assign_random_weights)."""
    node_count: int
    sources: np.ndarray
    targets: np.ndarray
    weights: np.ndarray | None = None
    directed: bool = True
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.node_count <= 0:
            raise ValueError(f'node_count must be positive, got {self.node_count}')
        sources = np.asarray(self.sources, dtype=np.int64).reshape(-1)
        targets = np.asarray(self.targets, dtype=np.int64).reshape(-1)
        if sources.shape != targets.shape:
            raise ValueError(f'{len(sources)} sources but {len(targets)} targets')
        if len(sources) and (min(sources.min(), targets.min()) < 0
                             or max(sources.max(), targets.max()) >= self.node_count):
            raise ValueError(f'edge endpoint outside 0..{self.node_count - 1}')
        if np.any(sources == targets):
            raise ValueError('self-loops are not allowed')
        pair_keys = sources * self.node_count + targets
        if len(np.unique(pair_keys)) != len(pair_keys):
            raise ValueError('duplicate edges are not allowed')
        object.__setattr__(self, 'sources', _read_only(sources))
        object.__setattr__(self, 'targets', _read_only(targets))
        if self.weights is not None:
            weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
            if weights.shape != sources.shape:
                raise ValueError(f'{len(weights)} weights for {len(sources)} edges')
            if np.any(weights <= 0.0) or np.any(weights > 1.0):
                raise ValueError('influence weights must lie in (0, 1]')
            incoming = np.bincount(targets, weights=weights, minlength=self.node_count)
            if incoming.max(initial=0.0) > 1.0 + WEIGHT_SUM_TOLERANCE:
                raise ValueError(f'incoming weight sum {incoming.max():.6f} exceeds 1')
            object.__setattr__(self, 'weights', _read_only(weights))
        if self.labels and len(self.labels) != self.node_count:
            raise ValueError(f'{len(self.labels)} labels for {self.node_count} nodes')

    @property
    def edge_count(self) -> int:
        """Number of directed edges (undirected inputs count twice here)."""
        return len(self.sources)

    @cached_property
    def reported_edge_count(self) -> int:
        if self.directed:
            return self.edge_count
        low = np.minimum(self.sources, self.targets)
        high = np.maximum(self.sources, self.targets)
        return len(np.unique(low * self.node_count + high))

    @cached_property
    def in_degrees(self) -> np.ndarray:
        return _read_only(np.bincount(self.targets, minlength=self.node_count))

    @cached_property
    def out_degrees(self) -> np.ndarray:
        return _read_only(np.bincount(self.sources, minlength=self.node_count))

    @property
    def has_weights(self) -> bool:
        return self.weights is not None

    def label(self, node: int) -> str:
        return self.labels[node] if self.labels else str(node)

    def edges(self) -> List[Tuple[int, int, float | None]]:
        weights = self.weights if self.weights is not None else [None] * self.edge_count
        return [(int(s), int(t), None if w is None else float(w))
                for s, t, w in zip(self.sources, self.targets, weights)]


def _read_only(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.flags.writeable = False
    return array


def load_edge_list(path: str | Path, directed: bool = True) -> DirectedSocialNetwork:
    """Load a whitespace-separated "src dst" edge list.

    Lines starting with '#' or '%' are comments. MatrixMarket coordinate files are
    accepted: their size line is skipped. Extra numeric columns are ignored.
    When directed is False every line yields both i->j and j->i."""
    path = Path(path)
    labels: dict[str, int] = {}
    sources: List[int] = []
    targets: List[int] = []
    seen = set()
    n_self_loops = n_duplicates = 0
    with open(path, 'r', encoding='utf-8') as f:
        matrix_market = False
        size_line_pending = False
        for line_number, line in enumerate(f, 1):
            if line_number == 1 and line.startswith('%%MatrixMarket'):
                matrix_market = size_line_pending = True
            stripped = line.strip()
            if not stripped or stripped[0] in '#%':
                continue
            if size_line_pending:
                size_line_pending = False
                continue
            m = EDGE_LINE_RE.fullmatch(line.rstrip('\n'))
            if not m:
                raise EdgeListError(f'Cannot parse edge "{stripped}"', path, line_number)
            src, dst = (labels.setdefault(str(int(token)), len(labels)) for token in m.group(1, 2))
            if src == dst:
                n_self_loops += 1
                continue
            pairs = [(src, dst)] if directed else [(src, dst), (dst, src)]
            for pair in pairs:
                if pair in seen:
                    n_duplicates += 1
                    continue
                seen.add(pair)
                sources.append(pair[0])
                targets.append(pair[1])
    if not sources:
        raise EdgeListError('Edge list contains no edges', path)
    if n_self_loops or n_duplicates:
        logger.warning(f'{path}: skipped {n_self_loops} self-loops and {n_duplicates} repeated edges')
    net = DirectedSocialNetwork(node_count=len(labels), sources=np.array(sources), targets=np.array(targets),
                                directed=directed, labels=tuple(labels))
    logger.info(f'Loaded {net.node_count} nodes and {net.reported_edge_count} edges from {path}'
                + (' (MatrixMarket)' if matrix_market else ''))
    return net


def normalize_incoming(targets: np.ndarray, weights: np.ndarray, node_count: int) -> np.ndarray:
    """Divide every incoming weight of a node by the node's incoming sum when that sum exceeds 1."""
    weights = np.asarray(weights, dtype=np.float64)
    sums = np.bincount(targets, weights=weights, minlength=node_count)
    scale = np.where(sums > 1.0, sums, 1.0)
    return weights / scale[targets]


def assign_random_weights(net: DirectedSocialNetwork, seed: int | np.random.SeedSequence) -> DirectedSocialNetwork:
    rng = np.random.default_rng(seed)
    raw = 1.0 - rng.random(net.edge_count)  # uniform on (0, 1]
    return replace(net, weights=normalize_incoming(net.targets, raw, net.node_count))


def adjacency_matrices(net: DirectedSocialNetwork) -> AdjacencyPair:
    """a_out[i, j] = 1 iff edge i->j; a_in is its transpose, so row i of a_in marks i's in-neighbors."""
    a_out = np.zeros((net.node_count, net.node_count))
    a_out[net.sources, net.targets] = 1.0
    return AdjacencyPair(a_out=a_out, a_in=a_out.T.copy())


def influence_matrix(net: DirectedSocialNetwork) -> np.ndarray:
    """Dense W with W[j, i] = w_ji."""
    if net.weights is None:
        raise ValueError('network has no influence weights; call assign_random_weights first')
    w = np.zeros((net.node_count, net.node_count))
    w[net.sources, net.targets] = net.weights
    return w


def from_adjacency(a_out: np.ndarray, directed: bool = True) -> DirectedSocialNetwork:
    a_out = np.asarray(a_out)
    if a_out.ndim != 2 or a_out.shape[0] != a_out.shape[1]:
        raise ValueError(f'adjacency must be square, got shape {a_out.shape}')
    sources, targets = np.nonzero(a_out)
    return DirectedSocialNetwork(node_count=a_out.shape[0], sources=sources, targets=targets, directed=directed)


def extract_subnetwork(net: DirectedSocialNetwork, seed_node: int, target_size: int) -> DirectedSocialNetwork:
    """Breadth-first expansion from seed_node over undirected reachability, truncated at
    target_size nodes in visit order. Kept nodes are renumbered in ascending original id."""
    if not 0 < target_size <= net.node_count:
        raise ValueError(f'target_size {target_size} outside 1..{net.node_count}')
    if not 0 <= seed_node < net.node_count:
        raise ValueError(f'seed node {seed_node} outside 0..{net.node_count - 1}')
    graph = nx.Graph()
    graph.add_nodes_from(range(net.node_count))
    graph.add_edges_from(zip(net.sources.tolist(), net.targets.tolist()))
    visited = [seed_node] + [v for _, v in islice(nx.bfs_edges(graph, seed_node), target_size - 1)]
    if len(visited) < target_size:
        raise SubnetworkError(f'component of node {seed_node} has only {len(visited)} nodes, '
                              f'{target_size} requested', achieved_size=len(visited))
    kept = np.array(sorted(visited))
    remap = np.full(net.node_count, -1)
    remap[kept] = np.arange(len(kept))
    mask = (remap[net.sources] >= 0) & (remap[net.targets] >= 0)
    weights = net.weights[mask] if net.weights is not None else None
    labels = tuple(net.label(int(i)) for i in kept)
    return DirectedSocialNetwork(node_count=len(kept), sources=remap[net.sources[mask]],
                                 targets=remap[net.targets[mask]], weights=weights,
                                 directed=net.directed, labels=labels)


def degrees(net: DirectedSocialNetwork, node: int) -> Tuple[int, int]:
    """(in_degree, out_degree) counted as distinct neighbors."""
    if not 0 <= node < net.node_count:
        raise ValueError(f'node {node} outside 0..{net.node_count - 1}')
    return int(net.in_degrees[node]), int(net.out_degrees[node])


def network_stats(net: DirectedSocialNetwork) -> NetworkStats:
    edges = net.reported_edge_count
    return NetworkStats(nodes=net.node_count, edges=edges, avg_degree=2.0 * edges / net.node_count,
                        directed=net.directed)


# Network dump: header "|V| |E| directed_flag", then one "src dst weight" line per directed edge.

def dump_network(net: DirectedSocialNetwork, stream: TextIO) -> None:
    stream.write(f'{net.node_count} {net.edge_count} {int(net.directed)}\n')
    for src, dst, weight in net.edges():
        if weight is None:
            stream.write(f'{src} {dst}\n')
        else:
            stream.write(f'{src} {dst} {weight:{NUMBER_FORMAT}}\n')


def parse_network(lines: Iterator[Tuple[int, str]], filename: str | Path | None = None) -> DirectedSocialNetwork:
    """Read a network dump from an iterator of (line_number, line) pairs, consuming exactly
    the header and its edge lines."""
    try:
        line_number, header = next(lines)
    except StopIteration:
        raise EdgeListError('Missing network header', filename) from None
    m = DUMP_HEADER_RE.fullmatch(header.rstrip('\n'))
    if not m:
        raise EdgeListError(f'Bad network header "{header.strip()}"', filename, line_number)
    node_count, edge_count, directed = int(m.group(1)), int(m.group(2)), m.group(3) == '1'
    sources, targets, weights = [], [], []
    for _ in range(edge_count):
        try:
            line_number, line = next(lines)
        except StopIteration:
            raise EdgeListError(f'Expected {edge_count} edges, found {len(sources)}', filename) from None
        m = DUMP_EDGE_RE.fullmatch(line.rstrip('\n'))
        if not m:
            raise EdgeListError(f'Bad edge line "{line.strip()}"', filename, line_number)
        sources.append(int(m.group(1)))
        targets.append(int(m.group(2)))
        weights.append(m.group(3))
    weighted = [w is not None for w in weights]
    if any(weighted) and not all(weighted):
        raise EdgeListError('Network dump mixes weighted and unweighted edges', filename)
    weight_array = np.array([float(w) for w in weights]) if weights and all(weighted) else None
    return DirectedSocialNetwork(node_count=node_count, sources=np.array(sources, dtype=np.int64),
                                 targets=np.array(targets, dtype=np.int64), weights=weight_array,
                                 directed=directed)


def numbered_lines(stream: Iterable[str]) -> Iterator[Tuple[int, str]]:
    """(line_number, line) pairs, skipping blank lines and '#' comments."""
    for line_number, line in enumerate(stream, 1):
        if line.strip() and not line.lstrip().startswith('#'):
            yield line_number, line


def save_network(net: DirectedSocialNetwork, path: str | Path) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        dump_network(net, f)


def load_network(path: str | Path) -> DirectedSocialNetwork:
    with open(path, 'r', encoding='utf-8') as f:
        return parse_network(numbered_lines(f), filename=path)
