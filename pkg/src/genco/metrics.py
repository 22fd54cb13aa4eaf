"""Density, coverage and uniqueness of generated populations."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import cdist


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr.reshape(len(arr), -1)


def _check_k(n_real: int, k: int) -> None:
    if k < 1 or k >= n_real:
        raise ValueError(f"need 1 <= k < n_real, got k={k} with {n_real} real points")


def nnd_k(points, i: int, k: int) -> float:
    """Distance from ``points[i]`` to its k-th nearest other point."""
    pts = _as_points(points)
    _check_k(len(pts), k)
    d = np.sqrt(((pts - pts[i]) ** 2).sum(axis=1))
    d = np.delete(d, i)
    return float(np.sort(d)[k - 1])


def real_radii(reals, k: int) -> np.ndarray:
    pts = _as_points(reals)
    _check_k(len(pts), k)
    d = cdist(pts, pts)
    np.fill_diagonal(d, np.inf)
    return np.sort(d, axis=1)[:, k - 1]


def _membership(fakes, reals, k: int) -> np.ndarray:
    fakes, reals = _as_points(fakes), _as_points(reals)
    if len(fakes) == 0:
        raise ValueError("no fake samples")
    if fakes.shape[1] != reals.shape[1]:
        raise ValueError(f"fake/real dims differ: {fakes.shape[1]} vs {reals.shape[1]}")
    radii = real_radii(reals, k)
    # closed balls: a fake exactly on the radius counts
    return cdist(fakes, reals) <= radii[None, :]


def density(fakes, reals, k: int = 5) -> float:
    inside = _membership(fakes, reals, k)
    return float(inside.sum() / (k * inside.shape[0]))


def coverage(fakes, reals, k: int = 5) -> float:
    inside = _membership(fakes, reals, k)
    return float(inside.any(axis=0).mean())


def uniqueness(samples) -> float:
    arr = np.asarray(samples)
    if len(arr) == 0:
        raise ValueError("uniqueness of an empty population is undefined")
    flat = np.ascontiguousarray(arr.reshape(len(arr), -1))
    return len({row.tobytes() for row in flat}) / len(flat)


@dataclass
class MetricReport:
    density: float
    coverage: float
    unique_fraction: float
    mean_group_loss: float
    mean_individual_loss: float
    n_fake: int
    n_real: int
    k: int
    feasible_fraction: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate_population(fakes, reals, k: int = 5, group_loss: float = float("nan"),
                        individual_loss: float = float("nan"), feasible_fraction=None) -> MetricReport:
    inside = _membership(fakes, reals, k)
    return MetricReport(
        density=float(inside.sum() / (k * inside.shape[0])),
        coverage=float(inside.any(axis=0).mean()),
        unique_fraction=uniqueness(fakes),
        mean_group_loss=float(group_loss),
        mean_individual_loss=float(individual_loss),
        n_fake=int(inside.shape[0]),
        n_real=int(inside.shape[1]),
        k=int(k),
        feasible_fraction=feasible_fraction,
    )
