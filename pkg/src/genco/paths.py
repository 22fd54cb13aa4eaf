"""Node-cost shortest paths on grids and the tile -> cost mapping."""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError
from .levels import CLASS_NAMES, N_CLASSES, NEIGHBOURS

# Fixed per-class traversal cost. Walls play the role of mountains, empty
# tiles of open land; the remaining classes sit in between.
COST_TABLE = np.array([9.0, 0.0, 1.0, 2.0, 3.0, 5.0, 7.0, 1.0])
assert COST_TABLE.shape == (N_CLASSES,)


@dataclass
class TerrainGrid:
    node_costs: np.ndarray
    src: tuple = (0, 0)
    dst: tuple | None = None

    def __post_init__(self):
        self.node_costs = np.asarray(self.node_costs, dtype=np.float64)
        if self.node_costs.ndim != 2:
            raise DimensionError("node_costs must be a 2-d grid")
        if np.any(self.node_costs < 0) or not np.all(np.isfinite(self.node_costs)):
            raise ValueError("node costs must be finite and non-negative")
        h, w = self.node_costs.shape
        if self.dst is None:
            self.dst = (h - 1, w - 1)
        self.src, self.dst = tuple(self.src), tuple(self.dst)
        for r, c in (self.src, self.dst):
            if not (0 <= r < h and 0 <= c < w):
                raise ValueError(f"endpoint {(r, c)} outside {h}x{w} grid")


@dataclass
class PathSolution:
    indicator: np.ndarray
    total_cost: float
    cells: list


def shortest_path(t: TerrainGrid) -> PathSolution:
    """Dijkstra over 4-neighbour moves; a path pays the cost of every cell on it.

    Both endpoints are charged. Ties go to the first relaxation in the fixed
    neighbour order, so the returned path is deterministic.
    """
    costs = t.node_costs
    h, w = costs.shape
    dist = np.full((h, w), np.inf)
    prev: dict = {}
    dist[t.src] = costs[t.src]
    heap = [(dist[t.src], t.src)]
    done = np.zeros((h, w), dtype=bool)
    while heap:
        d, (r, c) = heapq.heappop(heap)
        if done[r, c]:
            continue
        done[r, c] = True
        if (r, c) == t.dst:
            break
        for dr, dc in NEIGHBOURS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and not done[nr, nc]:
                nd = d + costs[nr, nc]
                if nd < dist[nr, nc]:
                    dist[nr, nc] = nd
                    prev[(nr, nc)] = (r, c)
                    heapq.heappush(heap, (nd, (nr, nc)))
    cells = [t.dst]
    while cells[-1] != t.src:
        cells.append(prev[cells[-1]])
    cells.reverse()
    indicator = np.zeros((h, w))
    for cell in cells:
        indicator[cell] = 1.0
    total = float(sum(costs[cell] for cell in cells))
    return PathSolution(indicator, total, cells)


def cost_map(tiles: np.ndarray, table: np.ndarray = COST_TABLE) -> TerrainGrid:
    """Expected traversal cost per cell of a tile-probability map (H, W, 8)."""
    tiles = np.asarray(tiles, dtype=np.float64)
    if tiles.ndim != 3 or tiles.shape[-1] != N_CLASSES:
        raise DimensionError(f"tile map must be (H, W, {N_CLASSES}), got {tiles.shape}")
    if np.any(tiles < -1e-12) or np.any(tiles > 1 + 1e-12):
        raise ValueError("tile probabilities must lie in [0, 1]")
    return TerrainGrid(np.clip(tiles @ table, 0.0, None))


def cost_table() -> dict:
    return {name: float(v) for name, v in zip(CLASS_NAMES, COST_TABLE)}



def is_valid_path(sol: PathSolution, t: TerrainGrid) -> bool:
    """True iff ``sol`` walks src -> dst by unit moves, never revisits a cell,
    and its indicator and total cost agree with that walk."""
    cells = [tuple(int(v) for v in p) for p in sol.cells]
    h, w = t.node_costs.shape
    if not cells or cells[0] != t.src or cells[-1] != t.dst or len(set(cells)) != len(cells):
        return False
    for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
        if abs(r0 - r1) + abs(c0 - c1) != 1:
            return False
    if any(not (0 <= r < h and 0 <= c < w) for r, c in cells):
        return False
    expected = np.zeros((h, w))
    for cell in cells:
        expected[cell] = 1.0
    if not np.array_equal(expected, sol.indicator):
        return False
    return abs(sum(t.node_costs[c] for c in cells) - sol.total_cost) <= 1e-9 * (1 + abs(sol.total_cost))
