"""Deterministic two-stage grid search over the annealing coefficients (A, B)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .config import TOL


@dataclass(frozen=True)
class GreedySettings:
    """Optimizer settings for locally optimal coefficients.

    Attributes:
        grid: points per axis of the coarse uniform grid (>= 3).
        refine_rounds: local refinement rounds around the incumbent.
        refine_points: points per axis of each refinement grid.
        shrink: factor by which the refinement window shrinks per round.
        low, high: search domain for both A and B.
        constrain_sum: search only A + B = 1 (annealing-like), else the square.
        noise_blind: leave noise out of the objective (sensitivity checks).
    """

    grid: int = 21
    refine_rounds: int = 3
    refine_points: int = 9
    shrink: float = 4.0
    low: float = 0.0
    high: float = 1.0
    constrain_sum: bool = False
    noise_blind: bool = False

    def __post_init__(self):
        if self.grid < 3:
            raise ValueError("grid needs at least 3 points per axis")
        if self.refine_rounds and self.refine_points < 3:
            raise ValueError("refinement grid needs at least 3 points per axis")
        if not self.high > self.low:
            raise ValueError("empty search domain")


Objective = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _select(A, B, P, best, tie_tol):
    """Fold candidates into the incumbent; ties go to the smallest (A, B)."""
    cand = list(zip(P.tolist(), A.tolist(), B.tolist()))
    if best is not None:
        cand.append(best)
    top = max(p for p, _, _ in cand)
    tied = [(a, b, p) for p, a, b in cand if p >= top - tie_tol]
    a, b, p = min(tied)
    return (p, a, b)


def _axis(center, half, n, lo, hi):
    return np.unique(np.clip(np.linspace(center - half, center + half, n), lo, hi))


def grid_maximize(
    objective: Objective,
    settings: GreedySettings = GreedySettings(),
    tie_tol: float = TOL.tie_tol,
) -> Tuple[float, float, float]:
    """Maximize ``objective(A, B)`` (vectorized over 1-d candidate arrays).

    Returns:
        (A*, B*, objective value at the maximizer)
    """
    s = settings
    step = (s.high - s.low) / (s.grid - 1)
    g = np.linspace(s.low, s.high, s.grid)
    if s.constrain_sum:
        A = g
        B = 1.0 - g
    else:
        AA, BB = np.meshgrid(g, g, indexing="ij")
        A, B = AA.ravel(), BB.ravel()
    best = _select(A, B, np.asarray(objective(A, B), dtype=float), None, tie_tol)
    half = step
    for _ in range(s.refine_rounds):
        _, a0, b0 = best
        ga = _axis(a0, half, s.refine_points, s.low, s.high)
        if s.constrain_sum:
            A, B = ga, 1.0 - ga
        else:
            gb = _axis(b0, half, s.refine_points, s.low, s.high)
            AA, BB = np.meshgrid(ga, gb, indexing="ij")
            A, B = AA.ravel(), BB.ravel()
        best = _select(A, B, np.asarray(objective(A, B), dtype=float), best, tie_tol)
        half /= s.shrink
    p, a, b = best
    return a, b, p
