"""End-to-end acceptance checks; each prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
complete; they are also collected in the terminal summary.
"""

import math

import numpy as np
import pytest

from reinforced_search.engine import computation_time, evolve_layer, run_grover_annealing, run_schedule
from reinforced_search.harness import ExperimentConfig, fit_scaling, run_sweep
from reinforced_search.noise import NoiseSpec
from reinforced_search.problem import LayerCoefficients, ScheduleSpec, build_instance, success_probability
from reinforced_search.selftest import run_checks
from reinforced_search.spectral import DensityRep
from reinforced_search.twolevel import computation_time_two_level, greedy_trajectory, trajectory

R_GRID = [0.25 * k for k in range(21)]


def test_criterion_1_grover_scaling(report):
    sizes = range(6, 21)
    Ls = [computation_time_two_level(build_instance("qubit", n), 0.0, 0.5).layers for n in sizes]
    fit = fit_scaling([(2.0 ** n, L) for n, L in zip(sizes, Ls)], "log-log")
    ok = 0.45 <= fit.slope <= 0.55
    report("1 Grover scaling r=0", ok, f"slope {fit.slope:.4f} in [0.45, 0.55]; L = {Ls}")
    assert ok


def test_criterion_2_reinforced_scaling(report):
    sizes = range(6, 25)
    details, ok = [], True
    for delta in (0.5, 1e-6):
        Ls = [computation_time_two_level(build_instance("qubit", n), 1.0, delta).layers for n in sizes]
        fit = fit_scaling(list(zip(sizes, Ls)), "linear")
        ok &= fit.r2 > 0.98
        details.append(f"delta={delta:g}: R2 {fit.r2:.4f} slope {fit.slope:.3f}")
        if delta == 0.5:
            L20 = Ls[list(sizes).index(20)]
    bound = math.sqrt(2 ** 20) / 20
    ok &= L20 < bound
    details.append(f"L(N=20) = {L20} < {bound:.1f}")
    report("2 reinforced scaling r=1", ok, "; ".join(details))
    assert ok


def test_criterion_3_optimal_reinforcement(report):
    inst = build_instance("qudit", 100)
    details, ok = [], True
    for mech in ("qudit-coherent", "qudit-channel"):
        for eps in (0.0, 1.0, 2.0, 4.0):
            ps = [run_grover_annealing(inst, 10, r, NoiseSpec(mech, eps)).final_p for r in R_GRID]
            k = int(np.argmax(ps))
            good = 2.0 <= R_GRID[k] <= 3.0 and ps[k] > ps[0]
            ok &= good
            details.append(f"{mech} eps={eps:g}: r*={R_GRID[k]:g} P={ps[k]:.4f} P(r=0)={ps[0]:.4f}")
    report("3 optimal r in [2, 3]", ok, "; ".join(details))
    assert ok


@pytest.mark.slow
def test_criterion_4_coherent_noise_benefit(report):
    cfg = ExperimentConfig(
        encoding="qubit", sizes=(8,), schedule="grover", r_grid=(0.0, 1.0), eps_grid=(1.0, 2.0, 3.0),
        layers=50, mechanism="qubit-coherent", realizations=20, master_seed=2024,
    )
    stats = {(a.eps, a.r): a.stats for a in run_sweep(cfg).aggregates}
    details, ok = [], True
    for eps in (1.0, 2.0, 3.0):
        s0, s1 = stats[(eps, 0.0)], stats[(eps, 1.0)]
        gap = s1.mean - s0.mean
        combined = math.hypot(s0.stderr, s1.stderr)
        good = gap > 2 * combined and max(s0.stderr, s1.stderr) < 0.05
        ok &= good
        details.append(
            f"eps={eps:g}: P(r=1)={s1.mean:.3f}±{s1.stderr:.3f} P(r=0)={s0.mean:.3f}±{s0.stderr:.3f}"
        )
    report("4 coherent-noise benefit N=8", ok, "; ".join(details))
    assert ok


@pytest.mark.slow
def test_criterion_5_noisy_computation_time(report):
    dims = (50, 100, 200, 400, 800)

    def slope(r, mech, eps):
        Ls = [computation_time(build_instance("qudit", d), r, 0.5, NoiseSpec(mech, eps)).layers for d in dims]
        if any(L is None for L in Ls):
            return float("nan"), Ls
        return fit_scaling(list(zip(dims, Ls)), "log-log").slope, Ls

    details, ok = [], True
    base, Ls = slope(0.0, "none", 0.0)
    ok &= 0.45 <= base <= 0.55
    details.append(f"baseline r=0: slope {base:.3f} L={Ls}")
    for r, mech in ((1.0, "qudit-coherent"), (2.0, "qudit-channel")):
        for eps in (0.0, 2.0, 4.0):
            s, Ls = slope(r, mech, eps)
            ok &= s < 0.25
            details.append(f"{mech} r={r:g} eps={eps:g}: slope {s:.3f} L={Ls}")
    report("5 noisy computation time", ok, "; ".join(details))
    assert ok


def _random_config(rng):
    if rng.integers(0, 2):
        inst = build_instance("qubit", int(rng.integers(1, 5)))
    else:
        inst = build_instance("qudit", int(rng.integers(2, 17)))
    r = float(rng.uniform(0, 3))
    kind = ("grover", "explicit", "greedy")[int(rng.integers(0, 3))]
    L = int(rng.integers(2, 31)) if kind != "greedy" else int(rng.integers(2, 11))
    if kind == "grover":
        spec = ScheduleSpec.grover_spec(L)
    elif kind == "explicit":
        spec = ScheduleSpec.explicit([LayerCoefficients(*rng.uniform(0, 1, 2)) for _ in range(L)])
    else:
        spec = ScheduleSpec.greedy_spec(L)
    return inst, r, spec


def test_criterion_6_oracle_equivalence(report):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(50):
        inst, r, spec = _random_config(rng)
        trace = run_schedule(inst, spec, r)
        coeffs = [LayerCoefficients(rec.A, rec.B, rec.r) for rec in trace.records]
        analytic = trajectory(inst.p0, coeffs)
        rho = DensityRep.dense(np.outer(inst.initial_state(), inst.initial_state()))
        dense = []
        for c in coeffs:
            rho = evolve_layer(rho, inst, c)
            dense.append(success_probability(rho, inst))
        worst = max(worst, np.max(np.abs(np.subtract(trace.p_series, analytic))),
                    np.max(np.abs(np.subtract(dense, analytic))))
        if spec.kind == "greedy":
            ref = [p for _, _, p in greedy_trajectory(inst.p0, r, spec.layers)]
            worst = max(worst, np.max(np.abs(np.subtract(trace.p_series, ref))))
    ok = worst < 1e-8
    report("6 two-level vs full-space", ok, f"worst per-layer |dP| {worst:.2e} over 50 configs (bound 1e-8)")
    assert ok


def test_criterion_7_invariants(report):
    results = run_checks(seed=7, count=100)
    ok = all(res.passed for res in results)
    report("7 invariant suite", ok, "; ".join(res.line() for res in results))
    assert ok
