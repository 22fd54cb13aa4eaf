"""Solver layers: exact combinatorial forward pass, surrogate gradient backward.

Two surrogate gradients are available. ``blackbox`` re-solves at scores
moved against the incoming gradient and returns the scaled solution
difference. ``identity`` passes the incoming gradient straight through,
optionally with its per-cell mean removed.

Problems carry a ``sense``: level projection maximises c^T x, shortest path
minimises cost^T x. Both surrogates flip sign for minimisers so a descent
step on the scores always moves the solution toward lower loss.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .exceptions import DimensionError, SolverBudgetError
from .levels import LevelSpec
from .paths import TerrainGrid, shortest_path
from .projection import DEFAULT_NODE_BUDGET, project_level

log = logging.getLogger(__name__)

METHODS = ("blackbox", "identity")


@dataclass
class SolverLayerConfig:
    method: str = "blackbox"
    lam: float = 10.0
    project_grad: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown solver-layer method {self.method!r}")
        if self.method == "blackbox" and not self.lam > 0:
            raise ValueError("blackbox interpolation strength must be positive")


class LevelProblem:
    """argmax over playable levels of c^T x."""

    sense = 1.0

    def __init__(self, spec: LevelSpec, node_budget: int = DEFAULT_NODE_BUDGET):
        self.spec = spec
        self.node_budget = node_budget

    @property
    def shape(self) -> tuple:
        return self.spec.shape

    def solve(self, c: np.ndarray) -> np.ndarray:
        return project_level(np.asarray(c).reshape(self.shape), self.spec, self.node_budget)


class PathProblem:
    """Corner-to-corner shortest path over non-negative node costs."""

    sense = -1.0

    def __init__(self, height: int, width: int):
        self.height, self.width = height, width

    @property
    def shape(self) -> tuple:
        return (self.height, self.width)

    def solve(self, costs: np.ndarray) -> np.ndarray:
        # blackbox perturbations may push costs negative; Dijkstra needs >= 0
        costs = np.clip(np.asarray(costs, dtype=np.float64).reshape(self.shape), 0.0, None)
        return shortest_path(TerrainGrid(costs)).indicator


@dataclass
class SolveRecord:
    c: np.ndarray
    x: np.ndarray
    problem: object


def layer_forward(c: np.ndarray, cfg: SolverLayerConfig, problem) -> tuple[np.ndarray, SolveRecord]:
    c = np.asarray(c, dtype=np.float64).reshape(problem.shape)
    if not np.all(np.isfinite(c)):
        raise ValueError("solver input contains non-finite values")
    x = problem.solve(c)
    return x, SolveRecord(c.copy(), x, problem)


def blackbox_backward(record: SolveRecord, g_x: np.ndarray, lam: float) -> np.ndarray:
    """Interpolation gradient: -sense * (solve(c - sense*lam*g_x) - x) / lam."""
    g_x = np.asarray(g_x, dtype=np.float64).reshape(record.x.shape)
    if not np.any(g_x):
        return np.zeros_like(record.c)
    s = record.problem.sense
    try:
        x_pert = record.problem.solve(record.c - s * lam * g_x)
    except SolverBudgetError:
        log.warning("perturbed solve hit the node budget; returning a zero gradient")
        return np.zeros_like(record.c)
    return -s * (x_pert - record.x) / lam


def project_tangent(g: np.ndarray) -> np.ndarray:
    """Remove the mean over the class axis (or over the whole grid for 2-d solutions)."""
    if g.ndim == 3:
        return g - g.mean(axis=-1, keepdims=True)
    return g - g.mean()


def identity_backward(record: SolveRecord, g_x: np.ndarray, project_grad: bool) -> np.ndarray:
    g = np.asarray(g_x, dtype=np.float64).reshape(record.x.shape)
    if project_grad:
        g = project_tangent(g)
    return record.problem.sense * g


class SolverLayer:
    """Batched solver op on flat ``(batch, n)`` tensors."""

    def __init__(self, problem, cfg: SolverLayerConfig | None = None):
        self.problem = problem
        self.cfg = cfg or SolverLayerConfig()

    def backward_one(self, record: SolveRecord, g_x: np.ndarray) -> np.ndarray:
        if self.cfg.method == "blackbox":
            return blackbox_backward(record, g_x, self.cfg.lam)
        return identity_backward(record, g_x, self.cfg.project_grad)

    def solve_batch(self, c: np.ndarray) -> tuple[np.ndarray, list[SolveRecord]]:
        c = np.atleast_2d(np.asarray(c, dtype=np.float64))
        n = int(np.prod(self.problem.shape))
        if c.shape[1] != n:
            raise DimensionError(f"solver layer expects rows of length {n}, got {c.shape}")
        records = [layer_forward(row, self.cfg, self.problem)[1] for row in c]
        x = np.stack([r.x.ravel() for r in records])
        return x, records

    def __call__(self, c: Tensor) -> Tensor:
        x, records = self.solve_batch(c.data)

        def backward(g):
            grads = np.stack([self.backward_one(r, gi).ravel() for r, gi in zip(records, g)])
            c._accumulate(grads)

        out = Tensor.from_op(x, (c,), backward)
        out.name = "solver"
        return out
