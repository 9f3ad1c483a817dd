"""Numerical tolerances and size caps shared across the package."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-10
    normalization: float = 1e-10
    trace: float = 1e-9
    positivity: float = 1e-9
    krylov_tol: float = 1e-12
    krylov_max_dim: int = 64
    truncation_budget: float = 1e-8
    tie_tol: float = 1e-13


@dataclass(frozen=True)
class Caps:
    dense_exp: int = 1024
    qubit_max_n: int = 14
    qudit_max_d: int = 8192
    mixed_dense_d: int = 512
    mixed_factored_d: int = 5000


TOL = Tolerances()
CAPS = Caps()
