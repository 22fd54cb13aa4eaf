from __future__ import annotations

import numpy as np
import pytest

from genco.autodiff import Tensor
from genco.exceptions import ContractError, DimensionError
from genco.nn import DenseNet, OptimState, RngStream, load_checkpoint, optim_step, save_checkpoint


def test_rng_stream_is_reproducible():
    assert np.array_equal(RngStream(3).normal((4,)), RngStream(3).normal((4,)))
    assert not np.array_equal(RngStream(3).normal((4,)), RngStream(4).normal((4,)))


def test_forward_rejects_wrong_width():
    net = DenseNet.build([3, 4, 2], RngStream(0))
    with pytest.raises(DimensionError):
        net(Tensor(np.ones((2, 5))))


def test_optim_step_requires_gradients():
    net = DenseNet.build([3, 2], RngStream(0))
    with pytest.raises(ContractError):
        optim_step(net, OptimState("sgd", 0.1))


@pytest.mark.parametrize("method", ["sgd", "adam"])
def test_optimizer_reduces_quadratic(method):
    net = DenseNet.build([2, 1], RngStream(1))
    x = np.array([[1.0, -2.0], [0.5, 0.3]])
    state = OptimState(method, 0.05)
    losses = []
    for _ in range(50):
        net.zero_grad()
        loss = net(Tensor(x)).square().sum()
        losses.append(float(loss.data))
        loss.backward()
        optim_step(net, state)
    assert losses[-1] < 0.1 * losses[0]


def test_weight_clip_holds_after_every_step():
    net = DenseNet.build([4, 8, 1], RngStream(2), scale=5.0)
    state = OptimState("adam", 0.1, w_clip=0.01)
    for _ in range(3):
        net.zero_grad()
        net(Tensor(np.ones((2, 4)))).sum().backward()
        optim_step(net, state)
        assert max(np.abs(p.data).max() for p in net.parameters()) <= 0.01


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    net = DenseNet.build([3, 5, 2], RngStream(7))
    save_checkpoint(tmp_path / "c.json", {"g": net}, seed=7, step=11, extra={"note": 1})
    nets, seed, step, extra = load_checkpoint(tmp_path / "c.json")
    assert (seed, step, extra) == (7, 11, {"note": 1})
    assert nets["g"].flat().tobytes() == net.flat().tobytes()
