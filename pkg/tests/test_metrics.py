from __future__ import annotations

import math

import numpy as np
import pytest

from genco.metrics import coverage, density, evaluate_population, nnd_k, uniqueness


def oracle(fakes, reals, k):
    """Plain-loop density and coverage with math.dist."""
    fakes = [list(map(float, f)) for f in fakes]
    reals = [list(map(float, r)) for r in reals]
    radii = []
    for i, r in enumerate(reals):
        ds = sorted(math.dist(r, o) for j, o in enumerate(reals) if j != i)
        radii.append(ds[k - 1])
    inside = [[math.dist(f, r) <= radii[j] for j, r in enumerate(reals)] for f in fakes]
    dens = sum(sum(row) for row in inside) / (k * len(fakes))
    cov = sum(any(inside[i][j] for i in range(len(fakes))) for j in range(len(reals))) / len(reals)
    return dens, cov


def test_hand_case():
    assert density([[0.5]], [[0.0], [1.0]], k=1) == 2.0
    assert coverage([[0.5]], [[0.0], [1.0]], k=1) == 1.0


def test_against_oracle(rng):
    for i in range(40):
        reals = rng.normal(size=(rng.integers(3, 12), 3))
        fakes = rng.normal(size=(rng.integers(1, 10), 3))
        if i % 4 == 0:
            reals, fakes = np.round(reals), np.round(fakes)  # boundary ties
        k = int(rng.integers(1, len(reals)))
        d, c = oracle(fakes, reals, k)
        assert abs(density(fakes, reals, k) - d) < 1e-12
        assert abs(coverage(fakes, reals, k) - c) < 1e-12


def test_nnd_excludes_self():
    pts = np.array([[0.0], [1.0], [3.0]])
    assert nnd_k(pts, 0, 1) == 1.0
    assert nnd_k(pts, 0, 2) == 3.0


def test_uniqueness():
    assert uniqueness(np.array([[1, 0], [1, 0], [0, 1], [1, 1]])) == 0.75
    assert uniqueness(np.ones((5, 2))) == 0.2
    with pytest.raises(ValueError):
        uniqueness(np.zeros((0, 2)))


def test_errors():
    with pytest.raises(ValueError):
        density([[0.0]], [[0.0], [1.0]], k=2)
    with pytest.raises(ValueError):
        coverage(np.zeros((0, 1)), [[0.0], [1.0]], k=1)
    with pytest.raises(ValueError):
        density([[0.0, 1.0]], [[0.0], [1.0]], k=1)


def test_report_bounds(rng):
    reals = rng.normal(size=(20, 4))
    r = evaluate_population(reals, reals, k=5)
    assert r.coverage == 1.0 and r.unique_fraction == 1.0
    assert 0 <= r.coverage <= 1 and 1 / r.n_fake <= r.unique_fraction <= 1
