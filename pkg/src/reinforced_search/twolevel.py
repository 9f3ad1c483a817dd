"""Noise-free reinforced dynamics on the two-dimensional search subspace.

Without noise the state stays in span{|psi_f>, |psi_f_perp>}, so each layer is
a closed-form SU(2) rotation times a phase. This makes the noise-free greedy
computation time cheap at any number of qubits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .greedy import GreedySettings, grid_maximize
from .problem import LayerCoefficients, SearchInstance


@dataclass(frozen=True)
class TwoLevelState:
    alpha: complex  # amplitude on the target
    beta: complex  # amplitude on the normalized orthogonal complement

    @classmethod
    def initial(cls, p0: float) -> "TwoLevelState":
        return cls(complex(math.sqrt(p0)), complex(math.sqrt(1.0 - p0)))

    @property
    def p_success(self) -> float:
        return abs(self.alpha) ** 2

    @property
    def norm2(self) -> float:
        return abs(self.alpha) ** 2 + abs(self.beta) ** 2


@dataclass(frozen=True)
class FieldVector:
    h0: float
    hx: float
    hy: float
    hz: float

    @property
    def h(self) -> float:
        return math.sqrt(self.hx ** 2 + self.hy ** 2 + self.hz ** 2)


def _fields(alpha, beta, A, B, r, p0):
    c = alpha * np.conj(beta)
    h0 = 0.5 * (A + B - r)
    hx = -A * math.sqrt(p0 * (1.0 - p0)) - r * np.real(c)
    hy = r * np.imag(c)
    hz = 0.5 * (A - B - 2.0 * A * p0 - r * (2.0 * np.abs(alpha) ** 2 - 1.0))
    return h0, hx, hy, hz


def _rotate(alpha, beta, h0, hx, hy, hz):
    h = np.sqrt(hx ** 2 + hy ** 2 + hz ** 2)
    # sin(h)/h -> 1 as h -> 0, so the h = 0 rotation is the identity
    with np.errstate(invalid="ignore", divide="ignore"):
        sinc = np.where(h > 0, np.sin(h) / np.where(h > 0, h, 1.0), 1.0)
    cos = np.cos(h)
    phase = np.exp(-1j * h0)
    a = phase * (cos * alpha - 1j * sinc * (hz * alpha + (hx - 1j * hy) * beta))
    b = phase * (cos * beta - 1j * sinc * ((hx + 1j * hy) * alpha - hz * beta))
    return a, b


def field_components(c: LayerCoefficients, p0: float, s: TwoLevelState) -> FieldVector:
    h0, hx, hy, hz = _fields(s.alpha, s.beta, c.A, c.B, c.r, p0)
    return FieldVector(float(h0), float(hx), float(hy), float(hz))


def evolve_two_level(s: TwoLevelState, f: FieldVector) -> TwoLevelState:
    a, b = _rotate(s.alpha, s.beta, f.h0, f.hx, f.hy, f.hz)
    return TwoLevelState(complex(a), complex(b))


def step(s: TwoLevelState, c: LayerCoefficients, p0: float) -> TwoLevelState:
    return evolve_two_level(s, field_components(c, p0, s))


def candidate_probabilities(s: TwoLevelState, r: float, p0: float, A: np.ndarray, B: np.ndarray):
    """Next-layer success probability for arrays of candidate (A, B)."""
    a, _ = _rotate(s.alpha, s.beta, *_fields(s.alpha, s.beta, A, B, r, p0))
    return np.abs(a) ** 2


def greedy_step(s: TwoLevelState, r: float, p0: float, settings: GreedySettings = GreedySettings()):
    """Locally optimal (A, B) for one layer.

    Returns:
        (A*, B*, next state)
    """
    A, B, _ = grid_maximize(lambda a, b: candidate_probabilities(s, r, p0, a, b), settings)
    return A, B, step(s, LayerCoefficients(A, B, r), p0)


def trajectory(p0: float, coefficients: Sequence[LayerCoefficients]) -> List[float]:
    """P_success after each layer of a fixed schedule, starting from psi_i."""
    s = TwoLevelState.initial(p0)
    out = []
    for c in coefficients:
        s = step(s, c, p0)
        out.append(s.p_success)
    return out


def greedy_trajectory(p0: float, r: float, layers: int, settings: GreedySettings = GreedySettings()):
    """Greedy run for a fixed number of layers.

    Returns:
        list of (A*, B*, P_success) per layer
    """
    s = TwoLevelState.initial(p0)
    out = []
    for _ in range(layers):
        A, B, s = greedy_step(s, r, p0, settings)
        out.append((A, B, s.p_success))
    return out


@dataclass(frozen=True)
class ComputationTime:
    layers: Optional[int]  # None when not reached
    best_p: float

    @property
    def reached(self) -> bool:
        return self.layers is not None


def default_max_layers(dim: int) -> int:
    return math.ceil(10 * math.sqrt(dim))


def computation_time_two_level(
    inst: SearchInstance,
    r: float,
    delta: float,
    max_layers: Optional[int] = None,
    settings: GreedySettings = GreedySettings(),
) -> ComputationTime:
    """Smallest number of greedy layers reaching P_success > 1 - delta."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    p0 = inst.p0
    lmax = default_max_layers(inst.dim) if max_layers is None else max_layers
    s = TwoLevelState.initial(p0)
    best = s.p_success
    if inst.starts_above(delta):
        return ComputationTime(0, best)
    for l in range(1, lmax + 1):
        _, _, s = greedy_step(s, r, p0, settings)
        best = max(best, s.p_success)
        if s.p_success > 1.0 - delta:
            return ComputationTime(l, best)
    return ComputationTime(None, best)
