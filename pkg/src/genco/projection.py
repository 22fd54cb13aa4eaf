"""Exact linear projection onto the playable-level set.

``project_level`` returns argmax_{x in Omega} c^T x. The search is a depth
first branch and bound. Each node carries a mask of allowed (cell, class)
pairs; its bound is the optimum of the same problem without the
connectivity constraint, which is a rectangular assignment problem (cells
onto count slots) solved exactly with the Hungarian method. If the relaxed
optimum is playable the node is closed; otherwise the search branches on a
wall that separates the player's region, or on which wall-free region holds
the player, key and exit.

Ties are broken toward the lexicographically smallest class vector in
row-major order: after the optimal value is known, cells are fixed one at a
time to the smallest class that still admits an optimal completion.
"""
from __future__ import annotations

import itertools
import logging
from functools import lru_cache

import numpy as np
from scipy.ndimage import label
from scipy.optimize import linear_sum_assignment

from .exceptions import BoundError, DimensionError, InfeasibleError, SolverBudgetError
from .levels import (ENEMIES, EMPTY, EXIT, KEY, N_CLASSES, NEIGHBOURS, PLAYER, SINGLE_BOUND_CLASSES,
                     WALL, LevelSpec, one_hot)

log = logging.getLogger(__name__)

DEFAULT_NODE_BUDGET = 100_000
# relaxation columns: the five individually bounded classes, then the enemy pool
_POOL = len(SINGLE_BOUND_CLASSES)
_SPECIAL = (KEY, EXIT, PLAYER)
_SINGLE_COLS = list(SINGLE_BOUND_CLASSES)
_ENEMY_COLS = list(ENEMIES)


def tie_tolerance(c: np.ndarray) -> float:
    c = np.asarray(c, dtype=np.float64)
    return 1e-9 * (1.0 + float(np.abs(c).max(initial=0.0)) * c.reshape(-1, N_CLASSES).shape[0])


class _Search:
    """Workspace for one projection call. Not shared between calls."""

    def __init__(self, spec: LevelSpec, c: np.ndarray, node_budget: int):
        self.spec = spec
        self.h, self.w = spec.height, spec.width
        self.n = spec.n_cells
        self.c = c.reshape(self.n, N_CLASSES)
        self.node_budget = node_budget
        self.nodes = 0
        self.rows = np.arange(self.n)
        self.nbrs = []
        for r in range(self.h):
            for col in range(self.w):
                self.nbrs.append([(r + dr) * self.w + col + dc for dr, dc in NEIGHBOURS
                                  if 0 <= r + dr < self.h and 0 <= col + dc < self.w])
        col_src, mandatory = [], []
        for slot, cls in enumerate(SINGLE_BOUND_CLASSES):
            lo, hi = spec.bounds[cls]
            hi = min(hi, self.n)
            col_src += [slot] * hi
            mandatory += [True] * lo + [False] * (hi - lo)
        lo, hi = spec.enemy_total
        hi = min(hi, self.n)
        col_src += [_POOL] * hi
        mandatory += [True] * lo + [False] * (hi - lo)
        self.col_src = np.array(col_src, dtype=np.int64)
        self.mandatory = np.array(mandatory, dtype=bool)
        self.n_mandatory = int(self.mandatory.sum())
        span = float(np.abs(self.c).max(initial=0.0))
        self.bonus = 2.0 * self.n * (span + 1.0) + 1.0
        self.slot_class = np.array(SINGLE_BOUND_CLASSES + (-1,))

    def base_mask(self) -> np.ndarray:
        allowed = np.ones((self.n, N_CLASSES), dtype=bool)
        for cls in SINGLE_BOUND_CLASSES:
            if self.spec.bounds[cls][1] == 0:
                allowed[:, cls] = False
        if self.spec.enemy_total[1] == 0:
            allowed[:, list(ENEMIES)] = False
        return allowed

    # -- relaxation -----------------------------------------------------------
    def relax(self, allowed: np.ndarray):
        """Optimal count-feasible assignment ignoring connectivity, or None."""
        self.nodes += 1
        if self.nodes > self.node_budget:
            raise SolverBudgetError(f"projection exceeded {self.node_budget} search nodes")
        enemy_vals = np.where(allowed[:, _ENEMY_COLS], self.c[:, _ENEMY_COLS], -np.inf)
        enemy_arg = enemy_vals.argmax(axis=1)
        values = np.where(allowed[:, _SINGLE_COLS], self.c[:, _SINGLE_COLS], -np.inf)
        values = np.concatenate([values, enemy_vals[self.rows, enemy_arg][:, None]], axis=1)
        matrix = values[:, self.col_src] + self.bonus * self.mandatory
        try:
            rows, cols = linear_sum_assignment(matrix, maximize=True)
        except ValueError:
            return None
        picked = matrix[rows, cols]
        if not np.all(np.isfinite(picked)):
            return None
        if int(self.mandatory[cols].sum()) < self.n_mandatory:
            return None
        slots = self.col_src[cols]
        classes = np.empty(self.n, dtype=np.int64)
        classes[rows] = self.slot_class[slots]
        pool = slots == _POOL
        classes[rows[pool]] = np.asarray(ENEMIES)[enemy_arg[rows[pool]]]
        bound = float(self.c[self.rows, classes].sum())
        return bound, classes

    # -- connectivity -----------------------------------------------------------
    def components(self, passable: np.ndarray) -> np.ndarray:
        labels = np.full(self.n, -1, dtype=np.int64)
        current = 0
        for start in range(self.n):
            if not passable[start] or labels[start] >= 0:
                continue
            labels[start] = current
            stack = [start]
            while stack:
                u = stack.pop()
                for v in self.nbrs[u]:
                    if passable[v] and labels[v] < 0:
                        labels[v] = current
                        stack.append(v)
            current += 1
        return labels

    def playable(self, classes: np.ndarray) -> bool:
        if not self.spec.connectivity:
            return True
        labels = self.components(classes != WALL)
        p, k, e = (int(np.flatnonzero(classes == cls)[0]) for cls in (PLAYER, KEY, EXIT))
        return labels[p] == labels[k] == labels[e]

    def branch(self, allowed: np.ndarray, bound: float, classes: np.ndarray):
        """Children (allowed masks) that jointly cover every playable solution."""
        forced_wall = allowed[:, WALL] & (allowed.sum(axis=1) == 1)
        open_labels = self.components(~forced_wall)
        special = [int(np.flatnonzero(classes == cls)[0]) for cls in _SPECIAL]
        if len({open_labels[s] for s in special}) > 1:
            children = []
            for lab in range(open_labels.max() + 1):
                region = open_labels == lab
                if region.sum() < len(_SPECIAL):
                    continue
                child = allowed.copy()
                child[np.ix_(~region, list(_SPECIAL))] = False
                children.append((child, None))
            return children
        wall_labels = self.components(classes != WALL)
        player_region = wall_labels == wall_labels[special[2]]
        for cell in range(self.n):
            if classes[cell] == WALL and not forced_wall[cell] and any(player_region[v] for v in self.nbrs[cell]):
                keep_open = allowed.copy()
                keep_open[cell, WALL] = False
                make_wall = allowed.copy()
                make_wall[cell] = False
                make_wall[cell, WALL] = True
                # the relaxed optimum already walls this cell, so it carries over
                return [(make_wall, (bound, classes)), (keep_open, None)]
        raise AssertionError("disconnected relaxation without a separating free wall")

    # -- searches -------------------------------------------------------------------
    def maximise(self, allowed: np.ndarray, tol: float):
        best_val, best = -np.inf, None
        stack = [(allowed, None)]
        while stack:
            node, res = stack.pop()
            res = res or self.relax(node)
            if res is None:
                continue
            bound, classes = res
            if best is not None and bound <= best_val + tol:
                continue
            if self.playable(classes):
                best_val, best = bound, classes
                continue
            stack.extend(self.branch(node, bound, classes))
        return best_val, best

    def reach(self, allowed: np.ndarray, threshold: float):
        """Any playable solution with value >= threshold inside ``allowed``."""
        stack = [(allowed, None)]
        while stack:
            node, res = stack.pop()
            res = res or self.relax(node)
            if res is None or res[0] < threshold:
                continue
            if self.playable(res[1]):
                return res[1]
            stack.extend(self.branch(node, *res))
        return None

    def solve(self) -> np.ndarray:
        base = self.base_mask()
        tol = tie_tolerance(self.c)
        value, best = self.maximise(base, tol)
        if best is None:
            raise InfeasibleError("no playable level satisfies the count bounds")
        threshold = value - tol
        fixed = base.copy()
        for cell in range(self.n):
            for cls in range(int(best[cell])):
                if not base[cell, cls]:
                    continue
                trial = fixed.copy()
                trial[cell] = False
                trial[cell, cls] = True
                found = self.reach(trial, threshold)
                if found is not None:
                    best = found
                    break
            fixed[cell] = False
            fixed[cell, best[cell]] = True
        return best


def project_level(c: np.ndarray, spec: LevelSpec, node_budget: int = DEFAULT_NODE_BUDGET) -> np.ndarray:
    """argmax over playable levels of c^T x, as a binary (H, W, 8) array."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape != spec.shape:
        raise DimensionError(f"score field shape {c.shape} does not match spec {spec.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("score field contains non-finite values")
    spec.check_satisfiable()
    search = _Search(spec, c, node_budget)
    classes = search.solve()
    log.debug("projection closed after %d nodes", search.nodes)
    return one_hot(classes.reshape(spec.height, spec.width))


# ---------------------------------------------------------------------------
# enumeration oracle

BRUTE_FORCE_MAX_CELLS = 9


@lru_cache(maxsize=8)
def _enumerate_feasible(spec_key: tuple) -> np.ndarray:
    """Every playable level of a small spec as rows of class ids."""
    h, w, bounds, enemy_total, connectivity = spec_key
    bounds = dict(bounds)
    n = h * w
    filler = (WALL, EMPTY) + ENEMIES
    rest = np.array(list(itertools.product(filler, repeat=n - 3)), dtype=np.int8).reshape(-1, n - 3)
    walls = (rest == WALL).sum(axis=1)
    empties = (rest == EMPTY).sum(axis=1)
    enemies = np.isin(rest, ENEMIES).sum(axis=1)
    ok = ((bounds[WALL][0] <= walls) & (walls <= bounds[WALL][1])
          & (bounds[EMPTY][0] <= empties) & (empties <= bounds[EMPTY][1])
          & (enemy_total[0] <= enemies) & (enemies <= enemy_total[1]))
    rest = rest[ok]
    # component labels for every wall pattern, via scipy's labelling
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    labels_by_mask = np.empty((2**n, n), dtype=np.int32)
    for mask in range(2**n):
        open_cells = np.array([(mask >> i) & 1 == 0 for i in range(n)]).reshape(h, w)
        labels_by_mask[mask] = label(open_cells, structure=structure)[0].ravel()
    weights = (1 << np.arange(n)).astype(np.int64)
    blocks = []
    for p, k, e in itertools.permutations(range(n), 3):
        others = [i for i in range(n) if i not in (p, k, e)]
        rows = np.empty((len(rest), n), dtype=np.int8)
        rows[:, others] = rest
        rows[:, p], rows[:, k], rows[:, e] = PLAYER, KEY, EXIT
        if connectivity:
            masks = ((rows == WALL) * weights).sum(axis=1)
            lab = labels_by_mask[masks]
            keep = (lab[:, p] == lab[:, k]) & (lab[:, k] == lab[:, e])
            rows = rows[keep]
        blocks.append(rows)
    table = np.concatenate(blocks)
    # split every level into a head and tail half so scoring costs two gathers
    cut = (n + 1) // 2
    heads, head_ids = np.unique(table[:, :cut], axis=0, return_inverse=True)
    tails, tail_ids = np.unique(table[:, cut:], axis=0, return_inverse=True)
    return table, cut, heads, head_ids.ravel().astype(np.int32), tails, tail_ids.ravel().astype(np.int32)


def _spec_key(spec: LevelSpec) -> tuple:
    return (spec.height, spec.width, tuple(sorted(spec.bounds.items())), spec.enemy_total, spec.connectivity)


def brute_force_project(c: np.ndarray, spec: LevelSpec) -> np.ndarray:
    """Exhaustive argmax over all playable levels (at most nine cells)."""
    c = np.asarray(c, dtype=np.float64)
    if spec.n_cells > BRUTE_FORCE_MAX_CELLS:
        raise BoundError(f"enumeration limited to {BRUTE_FORCE_MAX_CELLS} cells, got {spec.n_cells}")
    if c.shape != spec.shape:
        raise DimensionError(f"score field shape {c.shape} does not match spec {spec.shape}")
    spec.check_satisfiable()
    table, cut, heads, head_ids, tails, tail_ids = _enumerate_feasible(_spec_key(spec))
    if len(table) == 0:
        raise InfeasibleError("no playable level satisfies the count bounds")
    flat = c.reshape(spec.n_cells, N_CLASSES)
    head_vals = sum(flat[j][heads[:, j]] for j in range(cut))
    tail_vals = sum(flat[cut + j][tails[:, j]] for j in range(spec.n_cells - cut))
    totals = head_vals[head_ids] + tail_vals[tail_ids]
    best = totals.max()
    tied = table[totals >= best - tie_tolerance(c)]
    order = np.lexsort(tied.T[::-1])
    return one_hot(tied[order[0]].astype(np.int64).reshape(spec.height, spec.width))
