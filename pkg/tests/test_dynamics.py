import math

import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from mirrordd.dynamics import (
    COLLECTIVE_BASIS,
    KET_22,
    KET_MINUS,
    KET_PLUS,
    SIGMA_A,
    SIGMA_B,
    InitialState,
    build_generator,
    check_density_matrix,
    check_time_grid,
    emission_rate,
    evolve_conditional,
    evolve_master,
    first_emission_density,
    mc_trajectories,
    survival_probability,
    trajectory_rng,
)
from mirrordd.errors import DomainError, UnphysicalRateError

T = np.linspace(0.0, 5.0, 101)


def random_hermitian(rng, n=4):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return a + a.conj().T


def random_state(rng):
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


# -- generator -------------------------------------------------------------------

def test_rates_of_generator():
    g = build_generator(0.05 + 0.01j)
    assert (g.gamma_plus, g.gamma_minus) == pytest.approx((1.05, 0.95))
    g0 = build_generator(0)
    assert (g0.gamma_plus, g0.gamma_minus) == (1.0, 1.0)
    with pytest.raises(UnphysicalRateError):
        build_generator(1.2)


def test_no_interaction_is_two_independent_atoms():
    g = build_generator(0)
    rng = np.random.default_rng(1)
    rho = random_state(rng)
    expected = -0.5 * ((SIGMA_A.T @ SIGMA_A + SIGMA_B.T @ SIGMA_B) @ rho + rho @ (SIGMA_A.T @ SIGMA_A + SIGMA_B.T @ SIGMA_B))
    expected += SIGMA_A @ rho @ SIGMA_A.T + SIGMA_B @ rho @ SIGMA_B.T
    assert np.allclose(g.apply(rho), expected, atol=1e-14)


def test_reset_term_matches_pairwise_form():
    gab = 0.07 - 0.03j
    g = build_generator(gab)
    rng = np.random.default_rng(2)
    rho = random_state(rng)
    sig = {"a": SIGMA_A, "b": SIGMA_B}
    big = {("a", "a"): 1.0, ("b", "b"): 1.0, ("a", "b"): gab, ("b", "a"): np.conj(gab)}
    reset = sum(big[i, j].real * sig[i] @ rho @ sig[j].conj().T for i in "ab" for j in "ab")
    ours = sum(r * op @ rho @ op.conj().T for r, op in g.jump_channels)
    assert np.allclose(ours, reset, atol=1e-15)


def test_trace_preservation_and_superoperator():
    g = build_generator(0.05 + 0.3j)
    rng = np.random.default_rng(3)
    for _ in range(10):
        h = random_hermitian(rng)
        assert abs(np.trace(g.apply(h))) < 1e-12
        assert np.allclose((g.superoperator @ h.reshape(16)).reshape(4, 4), g.apply(h), atol=1e-13)


def test_jump_operator_spectra():
    g = build_generator(0.1)
    for op in (g.l_plus, g.l_minus):
        ev = np.linalg.eigvalsh(op.conj().T @ op)
        assert np.allclose(ev, [0, 1, 1, 1]) or np.allclose(np.sort(ev), [0, 0, 1, 1])
        assert all(min(abs(e), abs(e - 1)) < 1e-12 for e in ev)


def test_conditional_hamiltonian_is_diagonal_in_collective_basis():
    r, d = 0.05, 0.2
    g = build_generator(complex(r, d))
    h = COLLECTIVE_BASIS.conj().T @ g.h_cond @ COLLECTIVE_BASIS
    expected = np.diag([0, d / 2 - 0.5j * (1 + r), -d / 2 - 0.5j * (1 - r), -1j])
    assert np.allclose(h, expected, atol=1e-15)


# -- master equation -------------------------------------------------------------

def test_plus_state_decays_at_gamma_plus():
    ts = evolve_master(build_generator(0.05 + 0.02j), InitialState("plus"), T)
    assert np.max(np.abs(ts["pop_plus"] - np.exp(-1.05 * T))) < 1e-8


def test_ground_state_is_stationary():
    ts = evolve_master(build_generator(0.05), InitialState("ground"), T)
    assert np.all(ts["pop_11"] == 1.0)
    assert np.all(ts["pop_22"] == 0.0)


def test_doubly_excited_decays_at_twice_gamma_free():
    ts = evolve_master(build_generator(0.05 - 0.1j), InitialState("doubly_excited"), T)
    assert np.max(np.abs(ts["pop_22"] / np.exp(-2 * T) - 1)) < 1e-10
    # cascade: |22> feeds |+-> at gamma_+- and each decays at its own rate
    for name, g in (("pop_plus", 1.05), ("pop_minus", 0.95)):
        exact = g / (2 - g) * (np.exp(-g * T) - np.exp(-2 * T))
        assert np.max(np.abs(ts[name] - exact)) < 1e-12


def test_master_matches_runge_kutta():
    g = build_generator(0.08 + 0.15j)
    rho0 = InitialState.product_mixture(0.3).density_matrix()
    rho0[1, 2] = rho0[2, 1] = 0.05  # add a coherence between |12> and |21>

    def rhs(_t, y):
        return g.apply(y.reshape(4, 4)).reshape(16)

    sol = solve_ivp(rhs, (0, 5), rho0.reshape(16).astype(complex), t_eval=T, method="DOP853", rtol=1e-12, atol=1e-14)
    ts = evolve_master(g, rho0, T)
    ref = sol.y.T.reshape(-1, 4, 4)
    pop_plus = np.real(np.einsum("k,nkl,l->n", KET_PLUS.conj(), ref, KET_PLUS))
    coh = np.einsum("k,nkl,l->n", KET_PLUS.conj(), ref, KET_MINUS)
    assert np.max(np.abs(ts["pop_plus"] - pop_plus)) < 1e-9
    assert np.max(np.abs(ts["re_coh_pm"] - coh.real)) < 1e-9
    assert np.max(np.abs(ts["im_coh_pm"] - coh.imag)) < 1e-9


def test_master_trace_and_positivity():
    g = build_generator(-0.3 + 0.4j)
    rng = np.random.default_rng(4)
    rho0 = random_state(rng)
    ts = evolve_master(g, rho0, T)
    assert np.max(np.abs(ts["trace"] - 1)) < 1e-10
    pops = np.stack([ts[c] for c in ("pop_11", "pop_plus", "pop_minus", "pop_22")])
    assert np.max(np.abs(pops.sum(axis=0) - 1)) < 1e-10
    assert pops.min() > -1e-10 and pops.max() < 1 + 1e-10


def test_level_shift_rotates_coherence():
    d = 0.4
    rho0 = np.outer((KET_PLUS + KET_MINUS) / math.sqrt(2), (KET_PLUS + KET_MINUS).conj() / math.sqrt(2))
    ts = evolve_master(build_generator(complex(0.0, d)), rho0, T)
    coh = ts["re_coh_pm"] + 1j * ts["im_coh_pm"]
    # <+|rho|-> picks up exp(-i d t) and decays at gamma_free
    assert np.allclose(coh, 0.5 * np.exp(-1j * d * T - T), atol=1e-12)


def test_nonuniform_grid():
    t = np.array([0.0, 0.1, 0.25, 1.0, 1.01, 3.0])
    ts = evolve_master(build_generator(0.05), InitialState("minus"), t)
    assert np.allclose(ts["pop_minus"], np.exp(-0.95 * t), atol=1e-14)


def test_validation():
    with pytest.raises(DomainError):
        check_time_grid([0.1, 0.2])
    with pytest.raises(DomainError):
        check_time_grid([0.0, 0.2, 0.2])
    with pytest.raises(DomainError):
        check_density_matrix(np.diag([0.5, 0.5, 0.5, 0.0]))
    with pytest.raises(DomainError):
        check_density_matrix(np.diag([1.5, -0.5, 0, 0]))
    with pytest.raises(DomainError):
        InitialState("mixture", 1.5)
    with pytest.raises(DomainError):
        InitialState("plus", 0.1)


def test_product_mixture_density():
    p = 0.3
    assert np.allclose(
        InitialState.product_mixture(p).density_matrix(),
        np.diag([(1 - p) ** 2, p * (1 - p), p * (1 - p), p * p]),
    )


# -- conditional evolution and closed forms ----------------------------------------

@pytest.mark.parametrize("p", [0.05, 0.1, 0.2, 0.7])
def test_conditional_norm_is_survival(p):
    g = build_generator(0.05 + 0.3j)
    ts = evolve_conditional(g, InitialState.product_mixture(p), T)
    assert np.max(np.abs(ts["P0"] - survival_probability(p, 0.05, T))) < 1e-10


def test_conditional_simple_states():
    g = build_generator(0.05)
    assert np.all(evolve_conditional(g, InitialState("ground"), T)["P0"] == 1.0)
    ts = evolve_conditional(g, KET_MINUS, T)
    assert np.allclose(ts["P0"], np.exp(-0.95 * T), rtol=1e-12)
    assert np.allclose(evolve_conditional(g, KET_22, T)["P0"], np.exp(-2 * T), rtol=1e-12)


def test_survival_probability_examples():
    for p in (0.0, 0.3, 1.0):
        assert survival_probability(p, 0.05, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert np.all(survival_probability(0.0, 0.05, T) == 1.0)
    assert survival_probability(1.0, 0.2, 1.0) == pytest.approx(math.exp(-2), rel=1e-14)
    assert survival_probability(1.0, 0.2, 1.0) == pytest.approx(0.13534, abs=1e-5)
    assert np.all(np.diff(survival_probability(0.4, 0.05, T)) <= 0)


@pytest.mark.parametrize("p", [0.05, 0.2, 0.9])
def test_first_emission_density(p):
    gab = 0.05
    w1 = lambda t: first_emission_density(p, gab, t)
    total = quad(w1, 0, np.inf, epsabs=1e-13)[0]
    assert total == pytest.approx(1 - (1 - p) ** 2, abs=1e-10)
    h = 1e-5
    t = np.linspace(0.1, 5, 50)
    fd = -(survival_probability(p, gab, t + h) - survival_probability(p, gab, t - h)) / (2 * h)
    assert np.max(np.abs(fd - w1(t))) < 1e-8
    assert np.all(first_emission_density(0.0, gab, t) == 0)


def test_emission_rate_examples():
    assert emission_rate(0.1, 0.05, 0.0) == 0.2
    assert np.allclose(emission_rate(0.1, 0.0, T), 0.2 * np.exp(-T), rtol=1e-15)
    p = 0.01
    t = np.linspace(0, 50, 2001)
    assert np.max(np.abs(emission_rate(p, 0.05, t) - first_emission_density(p, 0.05, t))) <= 4 * p * p


# -- Monte Carlo -------------------------------------------------------------------

def test_rng_streams_are_keyed_by_index():
    a = trajectory_rng(7, 3).random(4)
    assert np.array_equal(a, trajectory_rng(7, 3).random(4))
    assert not np.array_equal(a, trajectory_rng(7, 4).random(4))
    assert not np.array_equal(a, trajectory_rng(8, 3).random(4))
    # 64-bit and negative seeds are accepted
    trajectory_rng(2**64 - 1, 0)
    trajectory_rng(-5, 0)


def test_ground_state_never_jumps():
    ts = mc_trajectories(build_generator(0.05), InitialState("ground"), T, 200, seed=1)
    assert np.all(ts["P0"] == 1.0)
    assert np.all(ts["pop_11"] == 1.0)
    assert np.all(ts.stderr["pop_11"] == 0.0)


def test_mc_is_independent_of_workers_and_chunking():
    g = build_generator(0.05 + 0.1j)
    init = InitialState.product_mixture(0.3)
    t = np.linspace(0, 3, 7)
    a = mc_trajectories(g, init, t, 300, seed=11)
    b = mc_trajectories(g, init, t, 300, seed=11, workers=2, chunk_size=40)
    for name in a.channels:
        assert a[name].tobytes() == b[name].tobytes()
        assert a.stderr[name].tobytes() == b.stderr[name].tobytes()
    c = mc_trajectories(g, init, t, 300, seed=12)
    assert not np.array_equal(a["pop_11"], c["pop_11"])


def test_mc_single_trajectory_and_validation():
    ts = mc_trajectories(build_generator(0.05), InitialState("plus"), T, 1, seed=0)
    assert np.all(ts.stderr["pop_11"] == 0)
    with pytest.raises(DomainError):
        mc_trajectories(build_generator(0.05), InitialState("plus"), T, 0, seed=0)


def test_mc_plus_state_small_ensemble():
    n = 2000
    ts = mc_trajectories(build_generator(0.05), InitialState("plus"), T, n, seed=5)
    assert np.max(np.abs(ts["pop_plus"] - np.exp(-1.05 * T))) <= 4 / math.sqrt(n)
    assert np.array_equal(ts["pop_plus"], ts["P0"])


def test_mc_mixture_no_jump_fraction():
    n = 2000
    p = 0.1
    ts = mc_trajectories(build_generator(0.05), InitialState.product_mixture(p), T, n, seed=9)
    assert np.max(np.abs(ts["P0"] - survival_probability(p, 0.05, T))) <= 4 / math.sqrt(n)
    assert np.all(np.diff(ts["P0"]) <= 0)
