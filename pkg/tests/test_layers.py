from __future__ import annotations

import numpy as np
import pytest

from genco.autodiff import Tensor
from genco.exceptions import DimensionError
from genco.layers import (LevelProblem, PathProblem, SolverLayer, SolverLayerConfig, blackbox_backward,
                          identity_backward, layer_forward, project_tangent)
from genco.levels import objective


def test_blackbox_zero_when_perturbed_solve_unchanged(spec5, rng):
    c = rng.normal(size=spec5.shape)
    cfg = SolverLayerConfig("blackbox", 1e-6)
    x, rec = layer_forward(c, cfg, LevelProblem(spec5))
    g = blackbox_backward(rec, rng.normal(size=x.shape), cfg.lam)
    assert np.array_equal(g, np.zeros_like(c))
    assert np.array_equal(blackbox_backward(rec, np.zeros(x.shape), 10.0), np.zeros_like(c))


def test_blackbox_step_lowers_linear_loss(spec5, rng):
    # loss = w . x; moving c against the surrogate gradient must not raise it
    problem = LevelProblem(spec5)
    for _ in range(5):
        c = rng.normal(size=spec5.shape)
        w = rng.normal(size=spec5.shape)
        x, rec = layer_forward(c, SolverLayerConfig(), problem)
        g = blackbox_backward(rec, w, 10.0)
        x_new = problem.solve(c - 10.0 * g)
        assert (w * x_new).sum() <= (w * x).sum() + 1e-9


def test_blackbox_sign_for_minimiser(rng):
    problem = PathProblem(4, 4)
    costs = rng.uniform(0, 5, size=(4, 4))
    x, rec = layer_forward(costs, SolverLayerConfig(), problem)
    w = rng.normal(size=(4, 4))
    g = blackbox_backward(rec, w, 50.0)
    x_new = problem.solve(np.clip(costs - 0.5 * g, 0, None))
    assert (w * x_new).sum() <= (w * x).sum() + 1e-9


def test_identity_projection_sums_to_zero(spec5, rng):
    x, rec = layer_forward(rng.normal(size=spec5.shape), SolverLayerConfig("identity"), LevelProblem(spec5))
    g = identity_backward(rec, rng.normal(size=x.shape), True)
    assert np.abs(g.sum(axis=-1)).max() < 1e-12
    raw = rng.normal(size=x.shape)
    assert np.array_equal(identity_backward(rec, raw, False), raw)
    assert abs(project_tangent(rng.normal(size=(4, 4))).sum()) < 1e-12


def test_identity_sign_for_minimiser(rng):
    x, rec = layer_forward(rng.uniform(0, 1, (3, 3)), SolverLayerConfig("identity"), PathProblem(3, 3))
    g = rng.normal(size=(3, 3))
    assert np.allclose(identity_backward(rec, g, False), -g)


def test_layer_batches_and_checks_width(spec5, rng):
    layer = SolverLayer(LevelProblem(spec5), SolverLayerConfig("blackbox", 5.0))
    c = Tensor(rng.normal(size=(3, 200)), requires_grad=True)
    x = layer(c)
    assert x.shape == (3, 200)
    (x * Tensor(rng.normal(size=(3, 200)))).sum().backward()
    assert c.grad.shape == (3, 200)
    with pytest.raises(DimensionError):
        layer.solve_batch(np.zeros((2, 7)))


def test_forward_is_exact_argmax(spec5, rng):
    c = rng.normal(size=spec5.shape)
    x, _ = layer_forward(c, SolverLayerConfig(), LevelProblem(spec5))
    y = LevelProblem(spec5).solve(c)
    assert objective(c, x) == objective(c, y)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverLayerConfig("perturb")
    with pytest.raises(ValueError):
        SolverLayerConfig("blackbox", 0.0)
