"""Grid game levels: class legend, count/connectivity constraints, feasibility."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, InfeasibleError

WALL, EMPTY, KEY, EXIT, ENEMY1, ENEMY2, ENEMY3, PLAYER = range(8)
N_CLASSES = 8
CLASS_NAMES = ("wall", "empty", "key", "exit", "enemy1", "enemy2", "enemy3", "player")
CLASS_CHARS = "#.KE123P"
ENEMIES = (ENEMY1, ENEMY2, ENEMY3)
# classes whose counts are bounded individually; enemies share one pooled bound
SINGLE_BOUND_CLASSES = (WALL, EMPTY, KEY, EXIT, PLAYER)
NEIGHBOURS = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class LevelSpec:
    """Feasible set of a ``height x width`` level.

    ``bounds`` maps each non-enemy class to inclusive (min, max) counts;
    ``enemy_total`` bounds the number of enemy tiles of any type.
    """

    height: int
    width: int
    bounds: dict = field(default_factory=dict)
    enemy_total: tuple = (0, 3)
    connectivity: bool = True

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("grid dimensions must be positive")
        n = self.height * self.width
        full = {WALL: (0, int(np.floor(0.4 * n))), EMPTY: (0, n), KEY: (1, 1), EXIT: (1, 1), PLAYER: (1, 1)}
        full.update({int(k): (int(v[0]), int(v[1])) for k, v in dict(self.bounds).items()})
        object.__setattr__(self, "bounds", full)
        object.__setattr__(self, "enemy_total", (int(self.enemy_total[0]), int(self.enemy_total[1])))
        for cls in (KEY, EXIT, PLAYER):
            if full[cls] != (1, 1):
                raise ValueError(f"{CLASS_NAMES[cls]} must appear exactly once")
        for lo, hi in list(full.values()) + [self.enemy_total]:
            if lo < 0 or hi < lo:
                raise ValueError(f"bad count bound ({lo}, {hi})")

    @classmethod
    def default(cls, height: int = 5, width: int = 5) -> "LevelSpec":
        return cls(height, width)

    @property
    def shape(self) -> tuple:
        return (self.height, self.width, N_CLASSES)

    @property
    def n_cells(self) -> int:
        return self.height * self.width

    def count_range(self, cls: int) -> tuple:
        if cls in ENEMIES:
            return (0, self.enemy_total[1])
        return self.bounds[cls]

    def is_satisfiable(self) -> bool:
        n = self.n_cells
        lo = sum(self.bounds[c][0] for c in SINGLE_BOUND_CLASSES) + self.enemy_total[0]
        hi = sum(min(self.bounds[c][1], n) for c in SINGLE_BOUND_CLASSES) + min(self.enemy_total[1], n)
        return lo <= n <= hi

    def check_satisfiable(self) -> None:
        if not self.is_satisfiable():
            raise InfeasibleError(f"count bounds cannot fill a {self.height}x{self.width} grid")

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "width": self.width,
            "bounds": {CLASS_NAMES[c]: list(self.bounds[c]) for c in SINGLE_BOUND_CLASSES},
            "enemy_total": list(self.enemy_total),
            "connectivity": self.connectivity,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "LevelSpec":
        bounds = {CLASS_NAMES.index(name): tuple(v) for name, v in payload.get("bounds", {}).items()}
        return cls(int(payload["height"]), int(payload["width"]), bounds,
                   tuple(payload.get("enemy_total", (0, 3))), bool(payload.get("connectivity", True)))


def one_hot(classes: np.ndarray) -> np.ndarray:
    """Class-index grid (H, W) -> binary (H, W, 8)."""
    classes = np.asarray(classes, dtype=np.int64)
    out = np.zeros(classes.shape + (N_CLASSES,))
    np.put_along_axis(out, classes[..., None], 1.0, axis=-1)
    return out


def class_grid(x: np.ndarray) -> np.ndarray:
    """Binary (H, W, 8) -> class-index grid (H, W)."""
    return np.asarray(x).argmax(axis=-1)


def _connected(classes: np.ndarray) -> bool:
    h, w = classes.shape
    start = tuple(np.argwhere(classes == PLAYER)[0])
    targets = {tuple(np.argwhere(classes == KEY)[0]), tuple(np.argwhere(classes == EXIT)[0])}
    seen = {start}
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        for dr, dc in NEIGHBOURS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and (nr, nc) not in seen and classes[nr, nc] != WALL:
                seen.add((nr, nc))
                queue.append((nr, nc))
    return targets <= seen


def check_feasible(x: np.ndarray, spec: LevelSpec) -> bool:
    """True iff ``x`` is one-hot, meets every count bound and is playable.

    Playable means the player reaches the key and the key reaches the exit
    through 4-neighbour non-wall cells; since the relation is symmetric this
    is the same as all three sharing a component.
    """
    x = np.asarray(x)
    if x.shape != spec.shape:
        raise DimensionError(f"level shape {x.shape} does not match spec {spec.shape}")
    if not np.all((x == 0) | (x == 1)) or not np.all(x.sum(axis=-1) == 1):
        return False
    counts = x.reshape(-1, N_CLASSES).sum(axis=0).astype(int)
    for cls in SINGLE_BOUND_CLASSES:
        lo, hi = spec.bounds[cls]
        if not lo <= counts[cls] <= hi:
            return False
    enemies = int(counts[list(ENEMIES)].sum())
    if not spec.enemy_total[0] <= enemies <= spec.enemy_total[1]:
        return False
    if spec.connectivity and not _connected(class_grid(x)):
        return False
    return True


def objective(c: np.ndarray, x: np.ndarray) -> float:
    """Linear score c^T x, summed cell by cell in row-major order."""
    classes = class_grid(x).ravel()
    flat = np.asarray(c, dtype=np.float64).reshape(-1, N_CLASSES)
    total = 0.0
    for i, k in enumerate(classes):
        total += flat[i, k]
    return total
