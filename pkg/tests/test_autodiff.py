from __future__ import annotations

import numpy as np
import pytest

from genco.autodiff import Tensor, gather_rows, stack_rows, straight_through
from genco.exceptions import ContractError, DimensionError
from genco.nn import DenseNet, RngStream


def numeric_grad(f, x, eps=1e-6):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        up = f(x)
        x[i] = old - eps
        down = f(x)
        x[i] = old
        g[i] = (up - down) / (2 * eps)
    return g


def check_grad(build, x0, tol=1e-5):
    t = Tensor(x0.copy(), requires_grad=True)
    build(t).backward()
    num = numeric_grad(lambda v: float(build(Tensor(v)).data), x0.copy())
    err = np.abs(t.grad - num).max() / max(1.0, np.abs(num).max())
    assert err < tol, err


OPS = {
    "add": lambda t: (t + 2.0 * t).sum(),
    "sub": lambda t: (1.0 - t - t * t).sum(),
    "mul": lambda t: (t * t * 3.0).sum(),
    "div": lambda t: (t / (t * t + 2.0)).sum(),
    "square": lambda t: t.square().mean(),
    "relu": lambda t: (t * 3.0).relu().sum(),
    "tanh": lambda t: t.tanh().sum(),
    "sigmoid": lambda t: t.sigmoid().sum(),
    "exp": lambda t: (t * 0.3).exp().sum(),
    "softmax": lambda t: (t.softmax(axis=-1) * Tensor(np.arange(12.0).reshape(3, 4))).sum(),
    "reshape_sum_axis": lambda t: t.reshape(4, 3).sum(axis=0).square().sum(),
    "mean_keepdims": lambda t: (t - t.mean(axis=1, keepdims=True)).square().sum(),
    "matmul": lambda t: (t @ Tensor(np.linspace(-1, 1, 8).reshape(4, 2))).square().sum(),
    "broadcast": lambda t: (t + Tensor(np.ones(4))).square().sum(),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_ops_match_finite_differences(name, rng):
    x = rng.normal(size=(3, 4)) + 0.1  # keep relu away from its kink
    check_grad(OPS[name], x)


def test_dense_net_gradient(rng):
    net = DenseNet.build([5, 7, 3], RngStream(0), hidden="tanh")
    x = rng.normal(size=(4, 5))
    w = net.layers[0].weight
    net.zero_grad()
    net(Tensor(x)).square().sum().backward()
    analytic = w.grad.copy()

    def f(v):
        old = w.data
        w.data = v
        out = float(net(Tensor(x)).square().sum().data)
        w.data = old
        return out

    num = numeric_grad(f, w.data.copy())
    assert np.abs(analytic - num).max() / np.abs(num).max() < 1e-5


def test_backward_needs_scalar():
    with pytest.raises(ContractError):
        Tensor(np.ones(3), requires_grad=True).backward()


def test_matmul_shape_error():
    with pytest.raises(DimensionError):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))


def test_reused_node_accumulates():
    t = Tensor(np.array([2.0]), requires_grad=True)
    y = t * t
    (y + y).sum().backward()
    assert t.grad[0] == pytest.approx(8.0)


def test_straight_through_passes_gradient_unchanged():
    src = Tensor(np.array([[1.0, 2.0]]), requires_grad=True)
    out = straight_through(src, np.array([[5.0, -1.0]]))
    assert np.array_equal(out.data, [[5.0, -1.0]])
    (out * Tensor(np.array([[3.0, 4.0]]))).sum().backward()
    assert np.array_equal(src.grad, [[3.0, 4.0]])


def test_gather_rows_scatters_back():
    table = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
    gather_rows(table, np.array([2, 2, 0])).sum().backward()
    assert np.array_equal(table.grad, [[1, 1], [0, 0], [2, 2]])


def test_stack_rows():
    a = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    b = Tensor(np.array([3.0, 4.0]), requires_grad=True)
    (stack_rows([a, b]) * Tensor(np.array([[1.0, 1.0], [2.0, 2.0]]))).sum().backward()
    assert np.array_equal(b.grad, [2.0, 2.0])
