"""Synthetic corpora: playable levels and clustered terrain maps."""
from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .exceptions import DataValidationError
from .levels import (EMPTY, ENEMIES, EXIT, KEY, N_CLASSES, NEIGHBOURS, PLAYER, WALL, LevelSpec,
                     check_feasible, one_hot)

DEFAULT_STYLE = {
    "wall_fill": (0.3, 1.0),     # fraction of the wall budget actually placed
    "segment_prob": 0.6,         # chance a new wall extends the previous one
    "enemy_max": 3,
}

# class priors for terrain maps, in legend order
TERRAIN_PRIORS = np.array([0.22, 0.28, 0.10, 0.10, 0.09, 0.08, 0.07, 0.06])
TERRAIN_SMOOTHING = 1.0


def _random_corridor(a: tuple, b: tuple, shape: tuple, gen: np.random.Generator) -> list:
    """A 4-connected walk from a to b that always steps closer, in random order."""
    cells = [a]
    r, c = a
    while (r, c) != b:
        moves = []
        if r != b[0]:
            moves.append((int(np.sign(b[0] - r)), 0))
        if c != b[1]:
            moves.append((0, int(np.sign(b[1] - c))))
        dr, dc = moves[gen.integers(len(moves))]
        r, c = r + dr, c + dc
        cells.append((r, c))
    return cells


def _one_level(spec: LevelSpec, gen: np.random.Generator, style: dict) -> np.ndarray:
    h, w = spec.height, spec.width
    classes = np.full((h, w), EMPTY, dtype=np.int64)
    picks = gen.choice(h * w, size=3, replace=False)
    anchors = [divmod(int(p), w) for p in picks]
    for cls, cell in zip((PLAYER, KEY, EXIT), anchors):
        classes[cell] = cls
    protected = np.zeros((h, w), dtype=bool)
    for a, b in ((anchors[0], anchors[1]), (anchors[1], anchors[2])):
        for cell in _random_corridor(a, b, (h, w), gen):
            protected[cell] = True

    lo_fill, hi_fill = style["wall_fill"]
    wall_cap = min(spec.bounds[WALL][1], int((~protected).sum()))
    n_walls = int(round(gen.uniform(lo_fill, hi_fill) * wall_cap))
    n_walls = max(n_walls, spec.bounds[WALL][0])
    last = None
    placed = 0
    while placed < n_walls:
        cell = None
        if last is not None and gen.random() < style["segment_prob"]:
            options = [(last[0] + dr, last[1] + dc) for dr, dc in NEIGHBOURS]
            options = [o for o in options if 0 <= o[0] < h and 0 <= o[1] < w
                       and not protected[o] and classes[o] == EMPTY]
            if options:
                cell = options[gen.integers(len(options))]
        if cell is None:
            free = np.argwhere((~protected) & (classes == EMPTY))
            if len(free) == 0:
                break
            cell = tuple(free[gen.integers(len(free))])
        classes[cell] = WALL
        last = cell
        placed += 1

    lo_e, hi_e = spec.enemy_total
    n_enemies = int(gen.integers(lo_e, min(hi_e, style["enemy_max"]) + 1))
    empties = np.argwhere(classes == EMPTY)
    n_enemies = min(n_enemies, len(empties))
    for idx in gen.choice(len(empties), size=n_enemies, replace=False):
        classes[tuple(empties[idx])] = ENEMIES[gen.integers(len(ENEMIES))]
    return one_hot(classes)


def synth_levels(spec: LevelSpec, n: int, seed: int, style_params: dict | None = None,
                 max_attempts: int | None = None) -> np.ndarray:
    """``n`` distinct playable levels, shape (n, H, W, 8)."""
    spec.check_satisfiable()
    if n < 1:
        raise ValueError("n must be >= 1")
    style = {**DEFAULT_STYLE, **(style_params or {})}
    unknown = set(style) - set(DEFAULT_STYLE)
    if unknown:
        raise ValueError(f"unknown style parameters: {sorted(unknown)}")
    gen = np.random.Generator(np.random.PCG64(seed))
    budget = max_attempts if max_attempts is not None else 50 * n + 1000
    seen, out = set(), []
    for _ in range(budget):
        level = _one_level(spec, gen, style)
        key = level.tobytes()
        if key in seen or not check_feasible(level, spec):
            continue
        seen.add(key)
        out.append(level)
        if len(out) == n:
            return np.stack(out)
    raise DataValidationError(f"only {len(out)} distinct levels after {budget} attempts")


def synth_terrain(dims: tuple, n: int, seed: int, priors: np.ndarray | None = None,
                  smoothing: float = TERRAIN_SMOOTHING) -> np.ndarray:
    """Blob-noise one-hot tile maps, shape (n, H, W, 8).

    Each class gets a smoothed Gaussian field plus its log prior; every cell
    takes the class with the largest field, which yields contiguous patches.
    """
    h, w = dims
    if n < 1 or h < 1 or w < 1:
        raise ValueError("n and dims must be positive")
    priors = TERRAIN_PRIORS if priors is None else np.asarray(priors, dtype=np.float64)
    if priors.shape != (N_CLASSES,) or np.any(priors <= 0):
        raise ValueError("priors must be 8 positive weights")
    bias = np.log(priors / priors.sum())
    gen = np.random.Generator(np.random.PCG64(seed))
    noise = gen.standard_normal((n, h, w, N_CLASSES))
    fields = gaussian_filter(noise, sigma=(0, smoothing, smoothing, 0), mode="wrap")
    fields /= fields.std(axis=(1, 2), keepdims=True) + 1e-12
    return one_hot((fields + bias).argmax(axis=-1))


def class_frequencies(maps: np.ndarray) -> np.ndarray:
    maps = np.asarray(maps, dtype=np.float64)
    return maps.reshape(-1, N_CLASSES).mean(axis=0)

