"""Coherent perturbations and incoherent channels for qubits and a qudit."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .spectral import CirculantShift, DensityRep, PauliSum, apply_pauli, shift

MECHANISMS = ("none", "qubit-coherent", "qudit-coherent", "qubit-channel", "qudit-channel")
RANDOM_MECHANISMS = ("qubit-coherent", "qubit-channel")
CHANNEL_MECHANISMS = ("qubit-channel", "qudit-channel")


@dataclass(frozen=True)
class NoiseSpec:
    """Total noise strength ``eps``, spread over L layers as eps / L."""

    mechanism: str = "none"
    eps: float = 0.0
    seed: int = 0
    weights: str = "uniform"  # Pauli-channel weight law: "uniform" or "dirichlet"

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown noise mechanism {self.mechanism!r}")
        if not math.isfinite(self.eps) or self.eps < 0:
            raise ValueError(f"noise strength must be finite and >= 0, got {self.eps}")
        if self.weights not in ("uniform", "dirichlet"):
            raise ValueError(f"unknown weight distribution {self.weights!r}")

    def layer_strength(self, layers: int) -> float:
        return self.eps / layers

    @property
    def is_random(self) -> bool:
        return self.mechanism in RANDOM_MECHANISMS and self.eps > 0

    @property
    def is_channel(self) -> bool:
        return self.mechanism in CHANNEL_MECHANISMS

    @property
    def active(self) -> bool:
        return self.mechanism != "none" and self.eps > 0

    def describe(self) -> str:
        return f"{self.mechanism}:eps={self.eps:g}:seed={self.seed}"


@dataclass(frozen=True)
class PauliWeights:
    w: np.ndarray  # shape (n_qubits, 3), columns x, y, z


class QuditPauliOps:
    """Generalized Pauli operators X (shift), Z (clock) and Y = XZ."""

    def __init__(self, dim: int):
        if dim < 2:
            raise ValueError("qudit dimension must be >= 2")
        self.dim = dim
        self.omega = np.exp(2j * np.pi / dim)

    @property
    def X(self) -> np.ndarray:
        return shift(np.eye(self.dim, dtype=complex), 1)

    @property
    def Z(self) -> np.ndarray:
        return np.diag(self.omega ** np.arange(self.dim))

    @property
    def Y(self) -> np.ndarray:
        return self.X @ self.Z


def _rng(seed: int, *indices: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed % 2 ** 64, *indices]))


def sample_qubit_coherent(seed: int, layer: int, eps_l: float, n_qubits: int) -> PauliSum:
    """Weight-one Pauli perturbation with i.i.d. Normal(0, eps_l^2) coefficients.

    Coefficients are drawn fresh for every layer from (seed, layer).
    """
    if eps_l < 0:
        raise ValueError("noise strength must be >= 0")
    coeff = _rng(seed, 0, layer).normal(0.0, 1.0, size=(n_qubits, 3)) * eps_l
    return PauliSum(coeff)


def qudit_coherent(eps_l: float, dim: int) -> CirculantShift:
    """Deterministic perturbation eps_l (X + X^dagger)."""
    if dim < 2:
        raise ValueError("qudit dimension must be >= 2")
    return CirculantShift(float(eps_l), dim)


def sample_pauli_weights(seed: int, n_qubits: int, distribution: str = "uniform") -> PauliWeights:
    """Positive channel weights summing to one, fixed for a realization."""
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    rng = _rng(seed, 1)
    if distribution == "uniform":
        u = rng.uniform(0.0, 1.0, size=(n_qubits, 3))
        # Uniform(0, 1) can return exactly 0
        u = np.where(u > 0, u, np.finfo(float).tiny)
        w = u / u.sum()
    elif distribution == "dirichlet":
        w = rng.dirichlet(np.ones(3 * n_qubits)).reshape(n_qubits, 3)
    else:
        raise ValueError(f"unknown weight distribution {distribution!r}")
    return PauliWeights(w)


def _check_strength(eps_l: float):
    if not 0.0 <= eps_l <= 1.0:
        raise ValueError(f"channel strength per layer must lie in [0, 1], got {eps_l}")


def apply_qubit_pauli_channel(rho: DensityRep, eps_l: float, weights: PauliWeights) -> DensityRep:
    """(1 - eps) rho + eps sum_{i,mu} w_{i mu} sigma_i^mu rho sigma_i^mu."""
    _check_strength(eps_l)
    if eps_l == 0.0:
        return rho
    n = weights.w.shape[0]
    if rho.is_factored:
        blocks = [math.sqrt(1.0 - eps_l) * rho.vectors * np.sqrt(rho.weights)]
        base = rho.vectors * np.sqrt(rho.weights)
        for i in range(n):
            for mu in range(3):
                blocks.append(math.sqrt(eps_l * weights.w[i, mu]) * apply_pauli(base, i, mu, n))
        return DensityRep.from_factor_matrix(np.hstack(blocks), discarded=rho.discarded)
    M = rho.matrix
    out = (1.0 - eps_l) * M
    for i in range(n):
        for mu in range(3):
            half = apply_pauli(M, i, mu, n)  # sigma rho
            out = out + eps_l * weights.w[i, mu] * apply_pauli(half.conj().T, i, mu, n).conj().T
    return DensityRep(matrix=0.5 * (out + out.conj().T), discarded=rho.discarded)


def apply_qudit_shift_channel(rho: DensityRep, eps_l: float) -> DensityRep:
    """(1 - eps) rho + eps X rho X^dagger."""
    _check_strength(eps_l)
    if eps_l == 0.0:
        return rho
    if rho.is_factored:
        base = rho.vectors * np.sqrt(rho.weights)
        F = np.hstack([math.sqrt(1.0 - eps_l) * base, math.sqrt(eps_l) * shift(base, 1)])
        return DensityRep.from_factor_matrix(F, discarded=rho.discarded)
    M = rho.matrix
    shifted = np.roll(np.roll(M, 1, axis=0), 1, axis=1)
    return DensityRep(matrix=(1.0 - eps_l) * M + eps_l * shifted, discarded=rho.discarded)


@dataclass(frozen=True)
class LayerNoise:
    """Noise acting in one layer: a Hermitian term inside H and/or a channel after U."""

    extra: Optional[object] = None  # PauliSum or CirculantShift
    mechanism: str = "none"
    eps_l: float = 0.0
    weights: Optional[PauliWeights] = None

    @property
    def has_channel(self) -> bool:
        return self.mechanism in CHANNEL_MECHANISMS and self.eps_l > 0

    def apply_channel(self, rho: DensityRep) -> DensityRep:
        if not self.has_channel:
            return rho
        if self.mechanism == "qubit-channel":
            return apply_qubit_pauli_channel(rho, self.eps_l, self.weights)
        return apply_qudit_shift_channel(rho, self.eps_l)


class NoiseModel:
    """Per-layer noise for one run with a fixed layer budget."""

    def __init__(self, spec: NoiseSpec, layers: int, encoding: str, size: int):
        self.spec = spec
        self.layers = layers
        self.encoding = encoding
        self.size = size
        self.eps_l = spec.layer_strength(layers) if layers > 0 else 0.0
        m = spec.mechanism
        if m.startswith("qubit") and encoding != "qubit":
            raise ValueError(f"mechanism {m} needs a qubit instance")
        if m.startswith("qudit") and encoding != "qudit":
            raise ValueError(f"mechanism {m} needs a qudit instance")
        if spec.is_channel:
            _check_strength(self.eps_l)
        self._weights = None
        if m == "qubit-channel":
            self._weights = sample_pauli_weights(spec.seed, size, spec.weights)

    def layer(self, l: int) -> LayerNoise:
        m = self.spec.mechanism
        if m == "none" or self.eps_l == 0.0:
            return LayerNoise(mechanism=m)
        if m == "qubit-coherent":
            return LayerNoise(sample_qubit_coherent(self.spec.seed, l, self.eps_l, self.size), m, self.eps_l)
        if m == "qudit-coherent":
            return LayerNoise(qudit_coherent(self.eps_l, self.size), m, self.eps_l)
        return LayerNoise(None, m, self.eps_l, self._weights)
