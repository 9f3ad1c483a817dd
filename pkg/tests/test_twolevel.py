import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reinforced_search.greedy import GreedySettings, grid_maximize
from reinforced_search.problem import LayerCoefficients, build_instance, grover_coefficients
from reinforced_search.twolevel import (
    FieldVector,
    TwoLevelState,
    candidate_probabilities,
    computation_time_two_level,
    evolve_two_level,
    field_components,
    greedy_step,
    step,
    trajectory,
)

from helpers import PAULI, dense_hamiltonian, expm_herm


def _state(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    v /= np.linalg.norm(v)
    return TwoLevelState(v[0], v[1])


def test_hy_vanishes_without_reinforcement(rng):
    for _ in range(10):
        f = field_components(LayerCoefficients(*rng.uniform(0, 1, 2), 0.0), 0.1, _state(rng))
        assert f.hy == 0.0


def test_hy_vanishes_for_real_amplitudes():
    s = TwoLevelState(0.6, 0.8)
    assert field_components(LayerCoefficients(0.3, 0.4, 2.0), 0.2, s).hy == 0.0


def test_fields_at_start_of_annealing():
    p0 = 1 / 16
    s = TwoLevelState.initial(p0)
    f = field_components(LayerCoefficients(1.0, 0.0, 0.0), p0, s)
    assert f.hx == pytest.approx(-np.sqrt(p0 * (1 - p0)), abs=1e-15)
    assert f.hz == pytest.approx(0.5 * (1 - 2 * p0), abs=1e-15)


def test_fields_match_dense_projection(rng):
    dim = 16
    p0 = 1 / dim
    f_vec = np.zeros(dim)
    f_vec[0] = 1
    perp = (np.ones(dim) - f_vec) / np.sqrt(dim - 1)
    basis = np.stack([f_vec, perp], axis=1)
    for _ in range(10):
        s = _state(rng)
        A, B, r = rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 3)
        psi = s.alpha * f_vec + s.beta * perp
        H = dense_hamiltonian(dim, A, B, r, np.outer(psi, psi.conj()))
        H2 = basis.T @ H @ basis
        got = field_components(LayerCoefficients(A, B, r), p0, s)
        assert got.h0 == pytest.approx(np.trace(H2).real / 2, abs=1e-12)
        assert got.hz == pytest.approx((H2[0, 0] - H2[1, 1]).real / 2, abs=1e-12)
        assert got.hx == pytest.approx(H2[0, 1].real, abs=1e-12)
        assert got.hy == pytest.approx(-H2[0, 1].imag, abs=1e-12)
        assert got.h ** 2 == pytest.approx(got.hx ** 2 + got.hy ** 2 + got.hz ** 2, abs=1e-12)


def test_zero_field_is_identity(rng):
    s = _state(rng)
    out = evolve_two_level(s, FieldVector(0, 0, 0, 0))
    assert out == s


def test_zero_rotation_is_global_phase(rng):
    s = _state(rng)
    out = evolve_two_level(s, FieldVector(0.7, 0, 0, 0))
    assert out.alpha == pytest.approx(np.exp(-0.7j) * s.alpha)
    assert out.beta == pytest.approx(np.exp(-0.7j) * s.beta)


def test_sigma_z_eigenstate():
    out = evolve_two_level(TwoLevelState(1, 0), FieldVector(0, 0, 0, np.pi / 2))
    assert abs(out.alpha) == pytest.approx(1.0)
    assert out.beta == 0


def test_evolve_matches_dense_2x2(rng):
    for _ in range(50):
        s = _state(rng)
        h = rng.normal(size=4)
        H = h[0] * np.eye(2) + sum(h[k + 1] * PAULI[k] for k in range(3))
        ref = expm_herm(H) @ np.array([s.alpha, s.beta])
        out = evolve_two_level(s, FieldVector(*h))
        np.testing.assert_allclose([out.alpha, out.beta], ref, atol=1e-12)
        assert out.norm2 == pytest.approx(1.0, abs=1e-12)


def test_norm_preserved_over_many_layers():
    rng = np.random.default_rng(5)
    p0 = 1 / 1024
    s = TwoLevelState.initial(p0)
    for _ in range(10_000):
        s = step(s, LayerCoefficients(*rng.uniform(0, 1, 2), rng.uniform(0, 3)), p0)
    assert abs(s.norm2 - 1) < 1e-10


def test_greedy_fixed_point_at_target():
    A, B, s = greedy_step(TwoLevelState(1, 0), 1.0, 1 / 64)
    assert s.p_success == pytest.approx(1.0, abs=1e-12)


def test_greedy_coarse_grid_by_construction():
    p0 = 1 / 16
    s = TwoLevelState.initial(p0)
    opts = GreedySettings(grid=3, refine_rounds=0)
    A, B, nxt = greedy_step(s, 0.0, p0, opts)
    vals = [step(s, LayerCoefficients(a, b), p0).p_success for a in (0, 0.5, 1) for b in (0, 0.5, 1)]
    assert nxt.p_success == pytest.approx(max(vals), abs=1e-13)


def test_greedy_returns_best_evaluated():
    seen = []

    def objective(A, B):
        vals = np.sin(3 * A) * np.cos(2 * B - 0.4)
        seen.extend(vals)
        return vals

    _, _, best = grid_maximize(objective)
    assert best >= max(seen) - 1e-13


def test_grid_tie_break_lexicographic():
    A, B, p = grid_maximize(lambda a, b: np.ones_like(a), GreedySettings(grid=5, refine_rounds=2))
    assert (A, B, p) == (0.0, 0.0, 1.0)


def _brute_force_p(p0, alpha, beta, r, n):
    """max over an n x n grid of the one-layer P via dense 2x2 eigh."""
    f = np.zeros(2)
    f[0] = 1
    psi_i = np.array([np.sqrt(p0), np.sqrt(1 - p0)])
    s = np.array([alpha, beta])
    rho = np.outer(s, s.conj())
    g = np.linspace(0, 1, n)
    best = 0.0
    for a in np.array_split(g, 20):
        AA, BB = np.meshgrid(a, g, indexing="ij")
        AA, BB = AA.ravel()[:, None, None], BB.ravel()[:, None, None]
        H = AA * (np.eye(2) - np.outer(psi_i, psi_i)) + BB * (np.eye(2) - np.outer(f, f)) - r * rho
        w, V = np.linalg.eigh(H)
        out = np.einsum("kij,kj,klj,l->ki", V, np.exp(-1j * w), V.conj(), s)
        best = max(best, float(np.max(np.abs(out[:, 0]) ** 2)))
    return best


def test_greedy_matches_fine_grid_d16():
    p0 = 1 / 16
    s = TwoLevelState.initial(p0)
    _, _, nxt = greedy_step(s, 0.0, p0)
    ref = _brute_force_p(p0, s.alpha, s.beta, 0.0, 1001)
    assert abs(nxt.p_success - ref) < 1e-6


def test_candidate_probabilities_vectorized(rng):
    s = _state(rng)
    A, B = rng.uniform(0, 1, 7), rng.uniform(0, 1, 7)
    got = candidate_probabilities(s, 1.3, 0.1, A, B)
    for k in range(7):
        assert got[k] == pytest.approx(step(s, LayerCoefficients(A[k], B[k], 1.3), 0.1).p_success, abs=1e-14)


def test_computation_time_already_there():
    inst = build_instance("qubit", 2)
    assert computation_time_two_level(inst, 0.0, 0.8).layers == 0


def test_computation_time_single_qubit():
    inst = build_instance("qubit", 1)
    ct = computation_time_two_level(inst, 0.0, 0.5)
    assert ct.layers == 1
    assert _brute_force_p(0.5, np.sqrt(0.5), np.sqrt(0.5), 0.0, 201) > 0.5


def test_computation_time_not_reached():
    inst = build_instance("qubit", 12)
    ct = computation_time_two_level(inst, 0.0, 0.5, max_layers=3)
    assert not ct.reached and 0 < ct.best_p < 0.5


def test_grover_scaling_small_sizes():
    Ls = [computation_time_two_level(build_instance("qubit", n), 0.0, 0.5).layers for n in range(4, 13, 2)]
    slope = np.polyfit(np.arange(4, 13, 2) * np.log(2), np.log(Ls), 1)[0]
    assert 0.45 <= slope <= 0.55


def test_trajectory_grover_schedule_ends_high():
    p0 = 1 / 256
    ps = trajectory(p0, grover_coefficients(p0, 50))
    assert len(ps) == 50 and ps[-1] > 0.8


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 5), st.floats(0, 2 * np.pi), st.floats(0.01, 0.99))
def test_step_preserves_norm(A, B, r, phase, a2):
    s = TwoLevelState(np.sqrt(a2) * np.exp(1j * phase), np.sqrt(1 - a2))
    out = step(s, LayerCoefficients(A, B, r), 0.05)
    assert out.norm2 == pytest.approx(1.0, abs=1e-12)
