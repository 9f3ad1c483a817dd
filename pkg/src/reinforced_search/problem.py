"""Search instances, annealing schedules and Hamiltonian assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .config import CAPS
from .greedy import GreedySettings
from .spectral import DensityRep, ExtraTerm, StructuredHamiltonian

# two-level runs only need P0, so the instance itself allows much larger N
MAX_QUBITS = 62


@dataclass(frozen=True)
class SearchInstance:
    encoding: str  # "qubit" or "qudit"
    size: int  # N for qubits, D for a qudit
    target: int = 0

    @property
    def dim(self) -> int:
        return 2 ** self.size if self.encoding == "qubit" else self.size

    @property
    def p0_exact(self) -> Fraction:
        return Fraction(1, self.dim)

    @property
    def p0(self) -> float:
        return float(self.p0_exact)

    def starts_above(self, delta: float) -> bool:
        """Whether the uniform start already has P_success > 1 - delta, compared exactly."""
        return self.p0_exact > 1 - Fraction(delta)

    def _check_materializable(self):
        cap = 2 ** CAPS.qubit_max_n if self.encoding == "qubit" else CAPS.qudit_max_d
        if self.dim > cap:
            raise ValueError(f"dimension {self.dim} is too large to store a state vector (cap {cap})")

    def target_state(self) -> np.ndarray:
        self._check_materializable()
        f = np.zeros(self.dim, dtype=complex)
        f[self.target] = 1.0
        return f

    def initial_state(self) -> np.ndarray:
        """Uniform superposition over all basis states."""
        self._check_materializable()
        return np.full(self.dim, 1.0 / math.sqrt(self.dim), dtype=complex)

    def describe(self) -> str:
        label = "n" if self.encoding == "qubit" else "d"
        return f"{self.encoding}:{label}={self.size}"


def build_instance(encoding: str, size: int, target: int = 0) -> SearchInstance:
    if encoding == "qubit":
        if not 1 <= size <= MAX_QUBITS:
            raise ValueError(f"number of qubits must be in [1, {MAX_QUBITS}], got {size}")
    elif encoding == "qudit":
        if not 2 <= size <= CAPS.qudit_max_d:
            raise ValueError(f"qudit dimension must be in [2, {CAPS.qudit_max_d}], got {size}")
    else:
        raise ValueError(f"unknown encoding {encoding!r}; expected 'qubit' or 'qudit'")
    inst = SearchInstance(encoding, size, target)
    if not 0 <= target < inst.dim:
        raise ValueError(f"target index {target} outside [0, {inst.dim})")
    return inst


@dataclass(frozen=True)
class LayerCoefficients:
    A: float
    B: float
    r: float = 0.0

    def __post_init__(self):
        for name in ("A", "B", "r"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"coefficient {name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class GroverSchedule:
    p0: float
    layers: int

    def __post_init__(self):
        if not 0.0 < self.p0 < 1.0:
            raise ValueError(f"Grover schedule needs 0 < P0 < 1, got {self.p0}")
        if self.layers < 2:
            raise ValueError(f"Grover schedule needs at least 2 layers, got {self.layers}")

    @property
    def phi(self) -> float:
        return math.atan(math.sqrt((1.0 - self.p0) / self.p0))


def grover_time(s: GroverSchedule, l: int) -> float:
    """Annealing parameter t_l of the Grover schedule (A = 1 - t, B = t)."""
    if not 0 <= l <= s.layers - 1:
        raise ValueError(f"layer index {l} outside [0, {s.layers - 1}]")
    if l == 0:
        return 0.0
    if l == s.layers - 1:
        return 1.0
    ratio = math.sqrt(s.p0 / (1.0 - s.p0))
    return 0.5 * (1.0 - ratio * math.tan((1.0 - 2.0 * l / (s.layers - 1)) * s.phi))


def grover_coefficients(p0: float, layers: int, r: float = 0.0) -> list:
    s = GroverSchedule(p0, layers)
    out = []
    for l in range(layers):
        t = grover_time(s, l)
        out.append(LayerCoefficients(1.0 - t, t, r))
    return out


@dataclass(frozen=True)
class ScheduleSpec:
    kind: str  # "grover", "greedy" or "explicit"
    layers: Optional[int] = None
    greedy: GreedySettings = field(default_factory=GreedySettings)
    coefficients: tuple = ()

    @classmethod
    def grover_spec(cls, layers: int) -> "ScheduleSpec":
        return cls("grover", layers)

    @classmethod
    def greedy_spec(cls, layers: int, settings: Optional[GreedySettings] = None) -> "ScheduleSpec":
        return cls("greedy", layers, settings or GreedySettings())

    @classmethod
    def explicit(cls, coefficients: Sequence[LayerCoefficients]) -> "ScheduleSpec":
        return cls("explicit", len(coefficients), coefficients=tuple(coefficients))

    def __post_init__(self):
        if self.kind not in ("grover", "greedy", "explicit"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "explicit" and len(self.coefficients) != self.layers:
            raise ValueError("explicit schedule length does not match layer count")

    def describe(self) -> str:
        return f"{self.kind}:L={self.layers}"


StateLike = Union[np.ndarray, DensityRep]


def density_terms(rho: StateLike):
    """(weights, vectors) such that rho = sum_k w_k |v_k><v_k|."""
    if isinstance(rho, DensityRep):
        w, V = rho.eigen()
        return np.asarray(w, dtype=float), V
    psi = np.asarray(rho, dtype=complex)
    return np.ones(1), psi[:, None]


def assemble_hamiltonian(
    inst: SearchInstance,
    c: LayerCoefficients,
    rho: StateLike,
    noise: ExtraTerm = None,
) -> StructuredHamiltonian:
    """A (I - |psi_i><psi_i|) + B (I - |psi_f><psi_f|) - r rho + noise."""
    dim = rho.dim if isinstance(rho, DensityRep) else len(rho)
    if dim != inst.dim:
        raise ValueError(f"state dimension {dim} does not match instance dimension {inst.dim}")
    weights = [-c.A, -c.B]
    cols = [inst.initial_state()[:, None], inst.target_state()[:, None]]
    if c.r != 0.0:
        w, V = density_terms(rho)
        weights.extend(-c.r * w)
        cols.append(V)
    return StructuredHamiltonian(
        dim=dim,
        identity=c.A + c.B,
        weights=np.array(weights, dtype=float),
        vectors=np.hstack(cols),
        extra=noise,
    )


def success_probability(state: StateLike, inst: SearchInstance) -> float:
    """Overlap of the state with the target basis state."""
    t = inst.target
    if isinstance(state, DensityRep):
        if state.is_factored:
            return float(np.sum(state.weights * np.abs(state.vectors[t]) ** 2))
        return float(np.real(state.matrix[t, t]))
    return float(abs(state[t]) ** 2)
