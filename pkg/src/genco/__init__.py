"""Generative models trained end to end through exact combinatorial solvers."""
from __future__ import annotations

from .estimators import ConstrainedGAN, ConstrainedVQVAE, LevelProjector, PenalizedGAN, PostprocessGAN
from .levels import LevelSpec, check_feasible
from .metrics import coverage, density, uniqueness
from .paths import TerrainGrid, shortest_path
from .projection import project_level

__all__ = [
    "ConstrainedGAN", "ConstrainedVQVAE", "LevelProjector", "PenalizedGAN", "PostprocessGAN",
    "LevelSpec", "check_feasible", "coverage", "density", "uniqueness",
    "TerrainGrid", "shortest_path", "project_level",
]

__version__ = "0.1.0"
