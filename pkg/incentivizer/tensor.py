"""
Dense tensors with reverse-mode automatic differentiation, the Adam optimizer and
the text checkpoint format.

A Tensor wraps a float64 numpy array of shape (rows, cols) or (batch, rows, cols).
Every operation records its inputs and a backward closure; Tensor.backward() walks the
recorded graph in reverse topological order and accumulates gradients on the leaves
(parameters). A 2-D operand combined with a batched one is broadcast across the batch,
and its gradient is summed back over the batch axis.
"""

from __future__ import annotations
from contextlib import contextmanager
from dataclasses import dataclass
import logging
from pathlib import Path
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Sequence, Tuple

import numpy as np
import regex

logger = logging.getLogger(__name__)

NORM_EPSILON = 1e-12
CHECKPOINT_HEADER = 'incentivizer-checkpoint'
CHECKPOINT_VERSION = 1
NUMBER_FORMAT = '.17g'

RECORD_RE = regex.compile(r'\s*([\w.\-]+)\s+(\d+)\s+(\d+)\s*')
METADATA_RE = regex.compile(r'#\s*([\w.\-]+)\s+(\S+)\s*')

_grad_enabled = True


class ShapeError(ValueError):
    def __init__(self, op: str, *shapes):
        super().__init__(f'{op}: incompatible shapes ' + ' and '.join(str(tuple(s)) for s in shapes))


class CheckpointError(ValueError):
    pass


@contextmanager
def no_grad():
    """Forward passes inside this block record no graph."""
    global _grad_enabled
    previous, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = previous


class Tensor:
    __slots__ = ('data', 'grad', 'requires_grad', 'name', 'op', '_parents', '_backward')

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        data = np.array(data, dtype=np.float64)
        if data.ndim < 2:
            data = data.reshape(1, -1)
        if data.ndim > 3:
            raise ShapeError('tensor', data.shape)
        if not np.all(np.isfinite(data)):
            raise ValueError(f'tensor {name or ""} has non-finite entries')
        self.data = data
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self.op = 'leaf'
        self._parents: Tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    def __repr__(self):
        label = f' {self.name}' if self.name else ''
        return f'Tensor{label}(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})'

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[-2]

    @property
    def cols(self) -> int:
        return self.data.shape[-1]

    @property
    def T(self) -> Tensor:
        return transpose(self)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError('item', self.shape)
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __truediv__(self, other: float):
        return scale(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self) -> None:
        """Reverse-mode pass from a scalar; gradients accumulate on leaf tensors."""
        if self.data.size != 1:
            raise ValueError(f'backward needs a scalar loss, got shape {self.shape}')
        if not self.requires_grad:
            return
        order = _topological_order(self)
        grads: Dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node._backward is None:
                node.grad = grad if node.grad is None else node.grad + grad
                continue
            for parent, parent_grad in zip(node._parents, node._backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data: np.ndarray, parents: Tuple[Tensor, ...], backward: Callable, op: str) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out.op = op
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


def _swap(array: np.ndarray) -> np.ndarray:
    return np.swapaxes(array, -1, -2)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('add', a, b)
    return _result(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), 'add')


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('sub', a, b)
    return _result(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), 'sub')


def mul(a, b) -> Tensor:
    """Elementwise product."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('mul', a, b)
    return _result(a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)), 'mul')


def scale(a, factor: float) -> Tensor:
    a = as_tensor(a)
    return _result(a.data * factor, (a,), lambda g: (g * factor,), 'scale')


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError('matmul', a.shape, b.shape)
    try:
        data = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError('matmul', a.shape, b.shape) from None

    def backward(g):
        grad_a = _unbroadcast(np.matmul(g, _swap(b.data)), a.shape) if a.requires_grad else None
        grad_b = _unbroadcast(np.matmul(_swap(a.data), g), b.shape) if b.requires_grad else None
        return grad_a, grad_b
    return _result(data, (a, b), backward, 'matmul')


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _result(_swap(a.data), (a,), lambda g: (_swap(g),), 'transpose')


def row_concat(*tensors) -> Tensor:
    """Concatenate along the column axis, so row i of the result is the concatenation of the rows i."""
    tensors = tuple(as_tensor(t) for t in tensors)
    leading = tensors[0].shape[:-1]
    if any(t.shape[:-1] != leading for t in tensors):
        raise ShapeError('row_concat', *(t.shape for t in tensors))
    splits = np.cumsum([t.cols for t in tensors])[:-1]
    return _result(np.concatenate([t.data for t in tensors], axis=-1), tensors,
                   lambda g: tuple(np.split(g, splits, axis=-1)), 'row_concat')


def relu(a) -> Tensor:
    a = as_tensor(a)
    return _result(np.maximum(a.data, 0.0), (a,), lambda g: (g * (a.data > 0.0),), 'relu')


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),), 'tanh')


def row_softmax(a) -> Tensor:
    a = as_tensor(a)
    shifted = np.exp(a.data - a.data.max(axis=-1, keepdims=True))
    y = shifted / shifted.sum(axis=-1, keepdims=True)
    return _result(y, (a,), lambda g: (y * (g - (g * y).sum(axis=-1, keepdims=True)),), 'row_softmax')


def mean_rows(a) -> Tensor:
    """Mean over the row axis: (..., rows, cols) -> (..., 1, cols)."""
    a = as_tensor(a)
    rows = a.rows
    return _result(a.data.mean(axis=-2, keepdims=True), (a,),
                   lambda g: (np.broadcast_to(g / rows, a.shape).copy(),), 'mean_rows')


def l2_normalize_row(a, eps: float = NORM_EPSILON) -> Tensor:
    """Divide every row by its L2 norm; rows with norm below eps are returned unchanged."""
    a = as_tensor(a)
    norms = np.sqrt((a.data * a.data).sum(axis=-1, keepdims=True))
    small = norms < eps
    safe = np.where(small, 1.0, norms)
    y = a.data / safe

    def backward(g):
        projected = (g - y * (g * y).sum(axis=-1, keepdims=True)) / safe
        return (np.where(small, g, projected),)
    return _result(y, (a,), backward, 'l2_normalize_row')


def mean_aggregate(adj, x, eps: float = NORM_EPSILON) -> Tensor:
    """Row i of the result is the adj-weighted mean of the rows of x selected by row i of adj.

    Rows of adj summing to less than eps aggregate to the zero vector."""
    adj, x = as_tensor(adj), as_tensor(x)
    if adj.shape[-1] != adj.shape[-2] or adj.shape[-1] != x.shape[-2]:
        raise ShapeError('mean_aggregate', adj.shape, x.shape)
    summed = np.matmul(adj.data, x.data)
    totals = adj.data.sum(axis=-1, keepdims=True)
    empty = totals < eps
    safe = np.where(empty, 1.0, totals)
    out = np.where(empty, 0.0, summed / safe)

    def backward(g):
        grad_summed = np.where(empty, 0.0, g / safe)
        grad_adj = grad_x = None
        if adj.requires_grad:
            grad_totals = np.where(empty, 0.0, -(g * summed).sum(axis=-1, keepdims=True) / (safe * safe))
            grad_adj = _unbroadcast(np.matmul(grad_summed, _swap(x.data)) + grad_totals, adj.shape)
        if x.requires_grad:
            grad_x = _unbroadcast(np.matmul(_swap(adj.data), grad_summed), x.shape)
        return grad_adj, grad_x
    return _result(out, (adj, x), backward, 'mean_aggregate')


def square(a) -> Tensor:
    a = as_tensor(a)
    return _result(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,), 'square')


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    return _result(np.array([[a.data.sum()]]), (a,),
                   lambda g: (np.full(a.shape, g.reshape(-1)[0]),), 'sum_all')


def mean_all(a) -> Tensor:
    a = as_tensor(a)
    return scale(sum_all(a), 1.0 / a.data.size)


def parameter(rows: int, cols: int, rng: np.random.Generator, fan_in: int | None = None,
              name: str | None = None) -> Tensor:
    """Trainable matrix drawn uniformly from [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(fan_in or rows)
    return Tensor(rng.uniform(-bound, bound, size=(rows, cols)), requires_grad=True, name=name)


def gradients(loss: Tensor, params: Sequence[Tensor]) -> List[np.ndarray]:
    """Fresh gradients of loss for params; parameters the loss does not reach get zeros."""
    for p in params:
        p.zero_grad()
    loss.backward()
    return [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]


def numerical_gradient(fn: Callable[[], float], param: Tensor, h: float = 1e-5,
                       indices: Iterable[Tuple[int, ...]] | None = None) -> np.ndarray:
    """Central finite differences of fn() with respect to param.data (entries outside indices stay 0)."""
    grad = np.zeros_like(param.data)
    for index in (indices if indices is not None else np.ndindex(param.shape)):
        original = param.data[index]
        param.data[index] = original + h
        upper = fn()
        param.data[index] = original - h
        lower = fn()
        param.data[index] = original
        grad[index] = (upper - lower) / (2.0 * h)
    return grad


@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_parameters(cls, params: Sequence[Tensor], **kwargs) -> AdamState:
        return cls(m=[np.zeros_like(p.data) for p in params], v=[np.zeros_like(p.data) for p in params], **kwargs)

    def copy(self) -> AdamState:
        return AdamState(m=[m.copy() for m in self.m], v=[v.copy() for v in self.v], step=self.step,
                         beta1=self.beta1, beta2=self.beta2, eps=self.eps)


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState, lr: float) -> Sequence[Tensor]:
    """One bias-corrected Adam update, applied to params in place."""
    if not len(params) == len(grads) == len(state.m):
        raise ValueError(f'{len(params)} parameters, {len(grads)} gradients, {len(state.m)} moment slots')
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.shape or state.m[i].shape != p.shape:
            raise ShapeError('adam_step', p.shape, g.shape)
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


class Adam:
    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, betas: Tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.state = AdamState.for_parameters(self.params, beta1=betas[0], beta2=betas[1], eps=eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        adam_step(self.params, grads, self.state, self.lr)


# Checkpoint file: "incentivizer-checkpoint <version>", "# key value" metadata lines,
# then per parameter a "name rows cols" record followed by its rows in decimal.

def save_checkpoint(path: str | Path, params: Mapping[str, Tensor | np.ndarray],
                    metadata: Mapping[str, object] | None = None) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        f.write(f'{CHECKPOINT_HEADER} {CHECKPOINT_VERSION}\n')
        for key, value in (metadata or {}).items():
            f.write(f'# {key} {value}\n')
        for name, value in params.items():
            data = value.data if isinstance(value, Tensor) else np.asarray(value, dtype=np.float64)
            if data.ndim != 2:
                raise ShapeError(f'checkpoint record {name}', data.shape)
            f.write(f'{name} {data.shape[0]} {data.shape[1]}\n')
            for row in data:
                f.write(' '.join(f'{v:{NUMBER_FORMAT}}' for v in row) + '\n')
    logger.info(f'Wrote {len(params)} parameters to {path}')


def load_checkpoint(path: str | Path) -> Tuple[Dict[str, np.ndarray], Dict[str, str]]:
    params: Dict[str, np.ndarray] = {}
    metadata: Dict[str, str] = {}
    with open(path, 'r', encoding='utf-8') as f:
        lines: Iterator[Tuple[int, str]] = ((n, line) for n, line in enumerate(f, 1) if line.strip())
        _, header = next(lines, (0, ''))
        if header.split() != [CHECKPOINT_HEADER, str(CHECKPOINT_VERSION)]:
            raise CheckpointError(f'{path}: unsupported checkpoint header "{header.strip()}"')
        for line_number, line in lines:
            if line.startswith('#'):
                m = METADATA_RE.fullmatch(line.rstrip('\n'))
                if not m:
                    raise CheckpointError(f'{path} line {line_number}: bad metadata "{line.strip()}"')
                metadata[m.group(1)] = m.group(2)
                continue
            m = RECORD_RE.fullmatch(line.rstrip('\n'))
            if not m:
                raise CheckpointError(f'{path} line {line_number}: bad record header "{line.strip()}"')
            name, rows, cols = m.group(1), int(m.group(2)), int(m.group(3))
            values = []
            for _ in range(rows):
                line_number, row = next(lines, (line_number, None))
                if row is None:
                    raise CheckpointError(f'{path}: parameter {name} is truncated')
                try:
                    parsed = [float(v) for v in row.split()]
                except ValueError:
                    raise CheckpointError(f'{path} line {line_number}: bad values for {name}') from None
                if len(parsed) != cols:
                    raise CheckpointError(f'{path} line {line_number}: {len(parsed)} values, expected {cols}')
                values.append(parsed)
            params[name] = np.array(values, dtype=np.float64).reshape(rows, cols)
    return params, metadata
