"""Layered reinforced dynamics in the full Hilbert space.

Pure states (noise-free or coherent noise) are propagated with the Lanczos
propagator. Incoherent noise uses a density matrix: dense up to
``CAPS.mixed_dense_d`` and factored with rank truncation above that.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np

from .config import CAPS, TOL
from .greedy import GreedySettings, grid_maximize
from .noise import LayerNoise, NoiseModel, NoiseSpec
from .problem import (
    LayerCoefficients,
    ScheduleSpec,
    SearchInstance,
    assemble_hamiltonian,
    grover_coefficients,
    success_probability,
)
from .spectral import (
    DensityRep,
    StructuredHamiltonian,
    conjugate_density,
    dense_unitary_exp,
    krylov_exp_apply,
    lanczos_expm_block,
    lowrank_exp_apply,
    truncate_rank,
)
from .twolevel import ComputationTime, default_max_layers

log = logging.getLogger(__name__)

State = Union[np.ndarray, DensityRep]


@dataclass(frozen=True)
class LayerRecord:
    layer: int
    A: float
    B: float
    r: float
    p_success: float
    diagnostic: float  # state norm (pure) or trace (mixed)
    truncation_loss: float = 0.0


@dataclass(frozen=True)
class RunTrace:
    instance: str
    schedule: str
    noise: str
    records: Tuple[LayerRecord, ...]

    @property
    def final_p(self) -> float:
        return self.records[-1].p_success if self.records else float("nan")

    @property
    def p_series(self):
        return [rec.p_success for rec in self.records]


def _density_form(inst: SearchInstance, density: str) -> bool:
    """True for the factored representation."""
    if density == "dense":
        if inst.dim > CAPS.dense_exp:
            raise ValueError(f"dense density path is capped at dimension {CAPS.dense_exp}")
        return False
    if density == "factored":
        factored = True
    elif density == "auto":
        factored = inst.dim > CAPS.mixed_dense_d
    else:
        raise ValueError(f"unknown density representation {density!r}")
    if factored and inst.dim > CAPS.mixed_factored_d:
        raise ValueError(f"mixed-state dimension {inst.dim} exceeds cap {CAPS.mixed_factored_d}")
    return factored


def initial_state(inst: SearchInstance, mixed: bool = False, density: str = "auto") -> State:
    psi = inst.initial_state()
    if not mixed:
        return psi
    return DensityRep.pure(psi, factored=_density_form(inst, density))


def state_diagnostic(state: State) -> float:
    if isinstance(state, DensityRep):
        return state.trace()
    return float(np.linalg.norm(state))


def evolve_layer(
    state: State,
    inst: SearchInstance,
    c: LayerCoefficients,
    noise: LayerNoise = LayerNoise(),
    tol: float = TOL.krylov_tol,
    budget: float = TOL.truncation_budget,
) -> State:
    """One layer: U built from the current state, then the channel if any."""
    if not isinstance(state, DensityRep) and noise.has_channel:
        state = DensityRep.pure(state, factored=_density_form(inst, "auto"))
    H = assemble_hamiltonian(inst, c, state, noise.extra)
    if not isinstance(state, DensityRep):
        return krylov_exp_apply(H, state, tol)
    if not state.is_factored:
        U = dense_unitary_exp(H.to_dense())
        return noise.apply_channel(conjugate_density(U, state))
    if H.extra is None:
        act = lambda X: lowrank_exp_apply(H, X)  # noqa: E731
    else:
        act = lambda X: krylov_exp_apply(H, X, tol)  # noqa: E731
    rho = noise.apply_channel(conjugate_density(act, state))
    return _post_channel(rho, budget)


def _post_channel(rho: DensityRep, budget: float) -> DensityRep:
    if rho.is_factored:
        return truncate_rank(rho, budget)
    return rho


# --- greedy objective -------------------------------------------------------

def _pure_candidates(psi, inst, r, extra, A, B, tol):
    dim = inst.dim
    t = inst.target
    H0 = StructuredHamiltonian(dim, 0.0, np.array([-r]), psi[:, None], extra)
    scale = 1.0 / np.sqrt(dim)

    def matvec(Y):
        out = H0.matvec(Y, include_identity=False)
        out = out - (A * (scale * np.sum(Y, axis=0))) * scale
        out[t] = out[t] - B * Y[t]
        return out

    start = np.repeat(psi[:, None], len(A), axis=1)
    Y = lanczos_expm_block(matvec, start, tol)
    return np.abs(Y[t]) ** 2


def _mixed_candidates(rho, inst, r, extra, eps_shift, A, B, tol):
    """Next-layer P for each candidate, via U^dagger applied to target vectors.

    P = (1 - eps) <u_t|rho|u_t> + eps <u_s|rho|u_s> with u = exp(iH) e and
    e_s = X^dagger e_t. Without an extra term all vectors live in the span of
    rho's range, psi_i and the targets, which H leaves invariant.
    """
    dim = inst.dim
    t = inst.target
    p, Phi = rho.eigen()
    keep = p > 1e-15
    p, Phi = p[keep], Phi[:, keep]
    targets = [t] + ([(t - 1) % dim] if eps_shift > 0 else [])
    E = np.zeros((dim, len(targets)), dtype=complex)
    for j, idx in enumerate(targets):
        E[idx, j] = 1.0
    M = len(A)
    Acol = np.tile(A, len(targets))
    Bcol = np.tile(B, len(targets))
    if extra is None:
        R = np.hstack([inst.initial_state()[:, None], E])
        R = R - Phi @ (Phi.conj().T @ R)
        U, s, _ = np.linalg.svd(R, full_matrices=False)
        basis = np.hstack([Phi, U[:, s > 1e-12]])
        k = len(p)
        diag = np.zeros(basis.shape[1])
        diag[:k] = r * p
        a = basis.conj().T @ inst.initial_state()
        b = basis.conj().T @ E[:, 0]

        def matvec(Y):
            out = diag[:, None] * Y
            out = out + np.outer(a, Acol * (a.conj() @ Y))
            return out + np.outer(b, Bcol * (b.conj() @ Y))

        starts = np.repeat(basis.conj().T @ E, M, axis=1)
        Y = lanczos_expm_block(matvec, starts, tol)
        vals = np.sum(p[:, None] * np.abs(Y[:k]) ** 2, axis=0)
    else:
        H0 = StructuredHamiltonian(dim, 0.0, -r * p, Phi, extra)
        psi_i = inst.initial_state()
        scale = 1.0 / np.sqrt(dim)

        def matvec(Y):
            out = H0.matvec(Y, include_identity=False)
            out = out - np.outer(psi_i, Acol * (scale * np.sum(Y, axis=0)))
            out[t] = out[t] - Bcol * Y[t]
            return -out

        Y = lanczos_expm_block(matvec, np.repeat(E, M, axis=1), tol)
        vals = DensityRep.factored(p, Phi).expectation(Y)
    if eps_shift > 0:
        return (1.0 - eps_shift) * vals[:M] + eps_shift * vals[M:]
    return vals


def candidate_probabilities(
    state: State,
    inst: SearchInstance,
    r: float,
    noise: LayerNoise,
    A: np.ndarray,
    B: np.ndarray,
    tol: float = TOL.krylov_tol,
) -> np.ndarray:
    """Success probability after one layer for each candidate (A[j], B[j])."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if noise.mechanism == "qubit-channel" and noise.has_channel:
        raise ValueError("greedy objective is undefined for the random Pauli channel")
    eps_shift = noise.eps_l if noise.has_channel else 0.0
    if isinstance(state, DensityRep):
        return _mixed_candidates(state, inst, r, noise.extra, eps_shift, A, B, tol)
    if eps_shift > 0:
        return _mixed_candidates(DensityRep.pure(state), inst, r, noise.extra, eps_shift, A, B, tol)
    return _pure_candidates(state, inst, r, noise.extra, A, B, tol)


def locally_optimal_coefficients(
    state: State,
    inst: SearchInstance,
    r: float,
    noise: LayerNoise = LayerNoise(),
    settings: GreedySettings = GreedySettings(),
    tol: float = TOL.krylov_tol,
):
    """Coefficients maximizing the next layer's success probability.

    Returns:
        (A*, B*, predicted P_success)
    """
    if noise.mechanism in ("qubit-coherent", "qubit-channel") and (noise.eps_l > 0):
        raise ValueError(
            f"locally optimal coefficients need deterministic noise, got {noise.mechanism}"
        )
    seen = LayerNoise() if settings.noise_blind else noise
    return grid_maximize(
        lambda a, b: candidate_probabilities(state, inst, r, seen, a, b, tol), settings
    )


# --- runs -------------------------------------------------------------------

def run_schedule(
    inst: SearchInstance,
    schedule: ScheduleSpec,
    r: float,
    noise: NoiseSpec = NoiseSpec(),
    density: str = "auto",
    stop_above: Optional[float] = None,
    tol: float = TOL.krylov_tol,
    budget: float = TOL.truncation_budget,
) -> RunTrace:
    """Run ``schedule.layers`` layers and record P_success after each.

    With ``stop_above`` the run ends at the first layer whose P_success
    exceeds it.
    """
    L = schedule.layers
    model = NoiseModel(noise, L, inst.encoding, inst.size)
    state = initial_state(inst, mixed=noise.is_channel and noise.eps > 0, density=density)
    if schedule.kind == "grover":
        fixed = grover_coefficients(inst.p0, L, r)
    elif schedule.kind == "explicit":
        fixed = [LayerCoefficients(c.A, c.B, r) for c in schedule.coefficients]
    else:
        fixed = None
    records = []
    for l in range(L):
        layer_noise = model.layer(l)
        if fixed is None:
            A, B, _ = locally_optimal_coefficients(state, inst, r, layer_noise, schedule.greedy, tol)
            c = LayerCoefficients(A, B, r)
        else:
            c = fixed[l]
        state = evolve_layer(state, inst, c, layer_noise, tol, budget)
        p = success_probability(state, inst)
        loss = state.discarded if isinstance(state, DensityRep) else 0.0
        records.append(LayerRecord(l, c.A, c.B, c.r, p, state_diagnostic(state), loss))
        if stop_above is not None and p > stop_above:
            break
    return RunTrace(inst.describe(), schedule.describe(), noise.describe(), tuple(records))


def run_grover_annealing(
    inst: SearchInstance,
    layers: int,
    r: float,
    noise: NoiseSpec = NoiseSpec(),
    density: str = "auto",
) -> RunTrace:
    return run_schedule(inst, ScheduleSpec.grover_spec(layers), r, noise, density)


def _budget_attempt(inst, r, delta, noise, budget, settings, density) -> Tuple[bool, float]:
    if noise.is_channel and noise.layer_strength(budget) > 1.0:
        return False, 0.0
    trace = run_schedule(
        inst, ScheduleSpec.greedy_spec(budget, settings), r, noise, density, stop_above=1.0 - delta
    )
    best = max(trace.p_series)
    return best > 1.0 - delta, best


def computation_time(
    inst: SearchInstance,
    r: float,
    delta: float,
    noise: NoiseSpec = NoiseSpec(),
    max_layers: Optional[int] = None,
    settings: GreedySettings = GreedySettings(),
    density: str = "auto",
    check_monotone: bool = True,
) -> ComputationTime:
    """Smallest layer budget L whose greedy run (per-layer noise eps / L)
    reaches P_success > 1 - delta at some layer.

    Budgets are searched by doubling then bisection; when the budget just
    above the result fails, the search falls back to a linear scan.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    lmax = default_max_layers(inst.dim) if max_layers is None else max_layers
    if inst.starts_above(delta):
        return ComputationTime(0, inst.p0)
    if not noise.active:
        trace = run_schedule(
            inst, ScheduleSpec.greedy_spec(lmax, settings), r, NoiseSpec(), density,
            stop_above=1.0 - delta,
        )
        best = max(trace.p_series)
        if best > 1.0 - delta:
            return ComputationTime(len(trace.records), best)
        return ComputationTime(None, best)

    cache: Dict[int, Tuple[bool, float]] = {}

    def attempt(L):
        if L not in cache:
            cache[L] = _budget_attempt(inst, r, delta, noise, L, settings, density)
        return cache[L][0]

    def best_seen():
        return max((v[1] for v in cache.values()), default=inst.p0)

    lo, hi, b = 0, None, 1
    while b <= lmax:
        if attempt(b):
            hi = b
            break
        lo = b
        b *= 2
    if hi is None and lo < lmax and attempt(lmax):
        hi = lmax
    if hi is None:
        return ComputationTime(None, best_seen())
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if attempt(mid):
            hi = mid
        else:
            lo = mid
    if check_monotone and hi + 1 <= lmax and not attempt(hi + 1):
        log.warning("budget search not monotone at L=%d for %s; scanning linearly", hi, inst.describe())
        for L in range(1, lmax + 1):
            if attempt(L):
                return ComputationTime(L, best_seen())
    return ComputationTime(hi, best_seen())
