#!/usr/bin/env python3

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[3]))

import numpy as np
import pytest

from incentivizer.tensor import (Adam, AdamState, CheckpointError, ShapeError, Tensor, adam_step, gradients,
                                 l2_normalize_row, load_checkpoint, matmul, mean_aggregate, mean_all, mean_rows,
                                 no_grad, numerical_gradient, relu, row_concat, row_softmax, save_checkpoint,
                                 square, sum_all, tanh, transpose)

rng = np.random.default_rng(12)

UNARY_OPS = {
    'relu': relu,
    'tanh': tanh,
    'row_softmax': row_softmax,
    'mean_rows': mean_rows,
    'transpose': transpose,
    'l2_normalize_row': l2_normalize_row,
    'square': square,
    'neg': lambda x: -x,
    'scale': lambda x: x / 4.0,
}


def check_gradient(loss_fn, *params, atol=1e-7, rtol=1e-5):
    analytic = gradients(loss_fn(), list(params))
    for param, grad in zip(params, analytic):
        numeric = numerical_gradient(lambda: loss_fn().item(), param)
        np.testing.assert_allclose(grad, numeric, rtol=rtol, atol=atol)


@pytest.mark.parametrize('name', sorted(UNARY_OPS))
def test_unary_gradients(name):
    op = UNARY_OPS[name]
    x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    probe = rng.normal(size=op(x).shape)
    check_gradient(lambda: sum_all(op(x) * probe), x)


def test_binary_gradients_with_row_broadcast():
    a = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    b = Tensor(rng.normal(size=(1, 3)), requires_grad=True)
    probe = rng.normal(size=(4, 3))
    check_gradient(lambda: sum_all((a + b) * probe), a, b)
    check_gradient(lambda: sum_all((a - b) * probe), a, b)
    check_gradient(lambda: sum_all(a * b * probe), a, b)


def test_matmul_and_concat_gradients():
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    c = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
    check_gradient(lambda: mean_all(square(row_concat(matmul(a, b), c))), a, b, c)


def test_mean_aggregate_gradients():
    adj = Tensor(rng.random((5, 5)) * (rng.random((5, 5)) < 0.6) + 0.05 * np.eye(5), requires_grad=True)
    adj.data[2] = 0.0
    x = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
    probe = rng.normal(size=(5, 3))
    check_gradient(lambda: sum_all(mean_aggregate(adj, x) * probe), x)
    adj.data[2] = 0.5
    check_gradient(lambda: sum_all(mean_aggregate(adj, x) * probe), adj)


def test_batched_weight_gradient_sums_over_batch():
    x = Tensor(rng.normal(size=(6, 4, 3)))
    w = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
    check_gradient(lambda: sum_all(tanh(matmul(x, w))), w)
    batched = gradients(sum_all(matmul(x, w)), [w])[0]
    np.testing.assert_allclose(batched, x.data.sum(axis=(0, 1))[:, None] * np.ones((1, 2)))


def test_mean_aggregate_forward():
    adj = np.array([[0.0, 1.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    x = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 8.0]])
    out = mean_aggregate(adj, x).data
    np.testing.assert_allclose(out, [[4.0, 6.0], [0.0, 0.0], [1.0, 2.0]])


def test_l2_normalize_zero_row():
    x = Tensor(np.array([[0.0, 0.0], [3.0, 4.0]]), requires_grad=True)
    y = l2_normalize_row(x)
    np.testing.assert_allclose(y.data, [[0.0, 0.0], [0.6, 0.8]])
    grad = gradients(sum_all(y * np.array([[1.0, 2.0], [0.0, 0.0]])), [x])[0]
    np.testing.assert_allclose(grad[0], [1.0, 2.0])


def test_softmax_rows_sum_to_one():
    y = row_softmax(rng.normal(size=(5, 7)) * 50).data
    np.testing.assert_allclose(y.sum(axis=1), np.ones(5), atol=1e-12)


def test_shape_errors():
    with pytest.raises(ShapeError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 3))) + Tensor(np.ones((3, 2)))
    with pytest.raises(ShapeError):
        row_concat(np.ones((2, 3)), np.ones((3, 3)))
    with pytest.raises(ShapeError):
        mean_aggregate(np.ones((3, 3)), np.ones((2, 2)))


def test_backward_needs_scalar():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ValueError):
        (x * 2.0).backward()


def test_non_finite_values_are_rejected():
    with pytest.raises(ValueError):
        Tensor(np.array([[1.0, np.nan]]))


def test_no_grad_records_nothing():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with no_grad():
        y = tanh(x)
    assert not y.requires_grad
    assert tanh(x).requires_grad


def test_shared_subexpression_accumulates():
    x = Tensor(np.array([[2.0]]), requires_grad=True)
    y = x * x
    loss = sum_all(y + y)
    loss.backward()
    assert x.grad[0, 0] == pytest.approx(8.0)


def test_adam_zero_gradient_leaves_parameter():
    p = Tensor(np.array([[1.0, -2.0]]), requires_grad=True)
    state = AdamState.for_parameters([p])
    adam_step([p], [np.zeros((1, 2))], state, lr=0.1)
    np.testing.assert_array_equal(p.data, [[1.0, -2.0]])


def test_adam_first_step_moves_by_lr():
    p = Tensor(np.array([[1.0, -2.0]]), requires_grad=True)
    state = AdamState.for_parameters([p])
    adam_step([p], [np.array([[0.5, -3.0]])], state, lr=0.01)
    np.testing.assert_allclose(p.data, [[0.99, -1.99]], atol=1e-9)
    assert state.step == 1


def test_adam_rejects_mismatched_gradients():
    p = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ShapeError):
        adam_step([p], [np.ones((1, 2))], AdamState.for_parameters([p]), lr=0.1)


def test_adam_minimises_quadratic():
    target = np.array([[3.0, -1.0]])
    p = Tensor(np.zeros((1, 2)), requires_grad=True)
    optimizer = Adam([p], lr=0.1)
    for _ in range(500):
        optimizer.zero_grad()
        sum_all(square(p - target)).backward()
        optimizer.step()
    np.testing.assert_allclose(p.data, target, atol=0.05)


def test_checkpoint_round_trip(tmp_path):
    params = {'actor.fc1.weight': rng.normal(size=(3, 4)), 'actor.fc1.bias': rng.normal(size=(1, 4))}
    save_checkpoint(tmp_path / 'model.ckpt', params, {'node_count': 3, 'variant': 'gac'})
    loaded, metadata = load_checkpoint(tmp_path / 'model.ckpt')
    assert metadata == {'node_count': '3', 'variant': 'gac'}
    assert list(loaded) == list(params)
    for name in params:
        np.testing.assert_array_equal(loaded[name], params[name])


def test_checkpoint_errors(tmp_path):
    path = tmp_path / 'bad.ckpt'
    path.write_text('some-other-format 1\n')
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    path.write_text('incentivizer-checkpoint 1\nw 2 2\n1 2\n')
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    path.write_text('incentivizer-checkpoint 1\nw 1 2\n1 2 3\n')
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
