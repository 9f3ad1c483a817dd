"""Randomized invariant checks, shared by ``reinforced-search selftest`` and the test suite."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from .engine import run_grover_annealing
from .noise import NoiseSpec, apply_qubit_pauli_channel, apply_qudit_shift_channel, sample_pauli_weights
from .problem import build_instance
from .spectral import (
    CirculantShift,
    DensityRep,
    PauliSum,
    StructuredHamiltonian,
    conjugate_density,
    dense_unitary_exp,
    krylov_exp_apply,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    bound: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: worst {self.worst:.3e} (bound {self.bound:.1e})"


def random_hermitian(rng, dim, scale=1.0):
    M = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (M + M.conj().T)


def random_unit(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(rng, dim, rank, factored):
    V, _ = np.linalg.qr(rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank)))
    w = rng.uniform(0.05, 1.0, size=rank)
    rho = DensityRep.factored(w / w.sum(), V)
    return rho if factored else DensityRep.dense(rho.to_dense())


def random_structured(rng, dim_choice=(2, 4, 8, 16, 32, 64, 128, 256)):
    dim = int(rng.choice(dim_choice))
    k = int(rng.integers(0, 4))
    vecs = np.stack([random_unit(rng, dim) for _ in range(k)], axis=1) if k else None
    weights = rng.uniform(-2.0, 2.0, size=k)
    kind = rng.integers(0, 3)
    extra = None
    if kind == 1:
        n = int(np.log2(dim))
        extra = PauliSum(rng.normal(0.0, 0.3, size=(n, 3)))
    elif kind == 2:
        extra = CirculantShift(float(rng.uniform(0.0, 1.0)), dim)
    return StructuredHamiltonian(dim, float(rng.uniform(0, 2)), weights, vecs, extra)


def check_unitarity(rng, count) -> CheckResult:
    worst = 0.0
    for _ in range(count):
        dim = int(rng.integers(2, 65))
        U = dense_unitary_exp(random_hermitian(rng, dim, rng.uniform(0.1, 5.0)))
        worst = max(worst, np.linalg.norm(U.conj().T @ U - np.eye(dim)) / (1e-10 * dim))
    return CheckResult("unitarity ||U^+U - I||_F / (1e-10 dim)", worst < 1.0, worst, 1.0)


def check_conjugation(rng, count) -> CheckResult:
    worst = 0.0
    for _ in range(count):
        dim = int(rng.integers(2, 33))
        rho = random_density(rng, dim, int(rng.integers(1, dim + 1)), bool(rng.integers(0, 2)))
        U = dense_unitary_exp(random_hermitian(rng, dim))
        out = conjugate_density(U, rho)
        tr_err = abs(out.trace() - 1.0) / 1e-9
        neg = max(0.0, -np.linalg.eigvalsh(out.to_dense())[0]) / 1e-9
        worst = max(worst, tr_err, neg)
    return CheckResult("conjugation trace/positivity (units of 1e-9)", worst < 1.0, worst, 1.0)


def check_channels(rng, count) -> CheckResult:
    worst = 0.0
    for i in range(count):
        factored = bool(rng.integers(0, 2))
        eps = float(rng.uniform(0.0, 1.0))
        if i % 2:
            n = int(rng.integers(1, 5))
            rho = random_density(rng, 2 ** n, int(rng.integers(1, 2 ** n + 1)), factored)
            out = apply_qubit_pauli_channel(rho, eps, sample_pauli_weights(int(rng.integers(2 ** 32)), n))
        else:
            dim = int(rng.integers(2, 33))
            rho = random_density(rng, dim, int(rng.integers(1, dim + 1)), factored)
            out = apply_qudit_shift_channel(rho, eps)
        tr_err = abs(out.trace() - 1.0) / 1e-10
        neg = max(0.0, -np.linalg.eigvalsh(out.to_dense())[0]) / 1e-9
        worst = max(worst, tr_err, neg)
    return CheckResult("channel trace (1e-10) / positivity (1e-9)", worst < 1.0, worst, 1.0)


def check_krylov(rng, count) -> CheckResult:
    worst = 0.0
    for _ in range(count):
        H = random_structured(rng)
        tol = float(10 ** rng.uniform(-12, -6))
        v = random_unit(rng, H.dim)
        err = np.linalg.norm(krylov_exp_apply(H, v, tol) - dense_unitary_exp(H.to_dense()) @ v)
        worst = max(worst, err / tol)
    return CheckResult("Krylov vs dense error / tol", worst < 1.0, worst, 1.0)


def check_determinism(rng, count) -> CheckResult:
    mismatches = 0
    for _ in range(count):
        n = int(rng.integers(2, 5))
        spec = NoiseSpec("qubit-coherent", float(rng.uniform(0, 3)), int(rng.integers(2 ** 63)))
        r = float(rng.uniform(0, 2))
        a = run_grover_annealing(build_instance("qubit", n), 8, r, spec)
        b = run_grover_annealing(build_instance("qubit", n), 8, r, spec)
        same = np.array(a.p_series).tobytes() == np.array(b.p_series).tobytes()
        mismatches += not same
    return CheckResult("seeded reruns identical (mismatch count)", mismatches == 0, float(mismatches), 0.5)


CHECKS: List[Callable] = [check_unitarity, check_conjugation, check_channels, check_krylov, check_determinism]


def run_checks(seed: int = 0, count: int = 100) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    return [check(rng, count) for check in CHECKS]


def run_selftest(seed: int = 0, count: int = 20) -> bool:
    results = run_checks(seed, count)
    for res in results:
        print(res.line())
    return all(res.passed for res in results)
