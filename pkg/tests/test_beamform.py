import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from miso_goodput.beamform import (
    BeamformDesign,
    effective_noise,
    eq17_lhs,
    maxmin_design,
    maxmin_gamma,
    maxmin_power_condition,
    power_matrix,
    signal_gains,
    solve_power_loading,
    zf_directions,
)
from miso_goodput.channel import crandn
from miso_goodput.exceptions import IllConditionedChannelError, InfeasibleTargetError, InvalidInputError

from oracles import lp_maxmin_gamma, projection_zf


def random_instance(rng, K=None, a=None):
    K = K or int(rng.integers(1, 9))
    gains = rng.uniform(0.5, 5.0, K)
    noise = rng.uniform(0.5, 2.0, K)
    err = rng.uniform(0.01, 0.1, K)
    a = rng.uniform(0, 50) if a is None else a
    return gains, noise, err, a, 10.0


# -- directions ------------------------------------------------------------

def test_single_user_direction_is_matched_filter():
    h = np.array([[1 + 1j, 2, -1j]])
    u = zf_directions(h)
    np.testing.assert_allclose(u[0], h[0] / np.linalg.norm(h[0]))


def test_orthogonal_estimates_give_matched_filters():
    h = np.array([[2, 0, 0, 0], [0, 1j, 0, 0]], dtype=complex)
    u = zf_directions(h)
    np.testing.assert_allclose(u, h / np.linalg.norm(h, axis=1)[:, None])


@pytest.mark.parametrize("seed", range(5))
def test_zf_matches_projection_construction(seed):
    rng = np.random.default_rng(seed)
    h = crandn(rng, (3, 8))
    u = zf_directions(h)
    ref = projection_zf(h)
    cross = np.abs(h.conj() @ u.T)
    np.fill_diagonal(cross, 0)
    assert cross.max() < 1e-8 * np.linalg.norm(h, axis=1).min()
    # identical up to a per-user phase
    np.testing.assert_allclose(np.abs(np.einsum("ki,ki->k", ref.conj(), u)), 1.0, atol=1e-12)


def test_rank_deficient_estimates_raise():
    h = np.array([[1, 1j, 0], [2, 2j, 0]], dtype=complex)
    with pytest.raises(IllConditionedChannelError):
        zf_directions(h)


def test_design_rejects_non_unit_directions():
    with pytest.raises(InvalidInputError):
        BeamformDesign(np.array([[2.0, 0.0]]), [1.0], 1.0)


# -- effective noise ----------------------------------------------------------

def test_effective_noise_single_user_is_zero():
    d = BeamformDesign(np.array([[1.0, 0.0]]), [3.0], 1.0)
    assert effective_noise(d, 0, np.zeros(2), np.eye(2)) == 0.0


def test_effective_noise_white_error():
    rng = np.random.default_rng(0)
    U = zf_directions(crandn(rng, (3, 6)))
    d = BeamformDesign(U, [1.0, 2.0, 3.0], 1.0)
    s = 1e-3
    assert effective_noise(d, 0, np.zeros(6), s * np.eye(6)) == pytest.approx(5 * s)


def test_effective_noise_matches_monte_carlo():
    rng = np.random.default_rng(1)
    n = 5
    U = zf_directions(crandn(rng, (3, n)))
    d = BeamformDesign(U, [1.0, 2.0, 0.5], 1.0)
    G = crandn(rng, (n, n))
    C = G @ G.conj().T / n
    mu = 0.5 * crandn(rng, n)
    w, V = np.linalg.eigh(C)
    e = mu + crandn(rng, (1_000_000, n)) @ (V * np.sqrt(w)).T
    M = d.interference_matrix(1)
    x = np.real(np.einsum("ni,ij,nj->n", e.conj(), M, e))
    assert abs(x.mean() - effective_noise(d, 1, mu, C)) < 3 * x.std() / np.sqrt(x.size)


# -- scalar budget condition --------------------------------------------------

def test_condition_without_scaling_is_classic_zf():
    g, s2 = np.array([2.0, 3.0]), np.array([1.0, 0.5])
    gamma = 4.0
    feasible, power = maxmin_power_condition(gamma, g, s2, [0.1, 0.1], 0.0, 10.0)
    assert power == pytest.approx(gamma * np.sum(s2 / g))
    assert feasible == (gamma * np.sum(s2 / g) <= 10.0)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 9.9, 10.1])
def test_single_user_condition(gamma):
    feasible, _ = maxmin_power_condition(gamma, [2.0], [0.2], [0.0], 0.0, 1.0)
    assert feasible == (gamma <= 1.0 * 2.0 / 0.2)


@pytest.mark.parametrize("t", [0.0, 0.05, 0.2])
@pytest.mark.parametrize("gamma", np.linspace(0.1, 4.0, 12))
def test_two_user_hand_derivation(t, gamma):
    P = 3.0
    feasible, power = maxmin_power_condition(gamma, [1, 1], [1, 1], [t, t], 1.0, P)
    assert feasible == (gamma * (2 + P * t) <= P)
    A = np.array([[1 / gamma, -t], [-t, 1 / gamma]])
    det = A[0, 0] ** 2 - t**2
    direct = (2 * (A[0, 0] + t) / det) if det > 0 and 1 / gamma > t else np.inf
    if np.isfinite(direct):
        assert power == pytest.approx(direct, rel=1e-12)
        assert power == pytest.approx(2 * gamma / (1 - t * gamma), rel=1e-12)


@pytest.mark.parametrize("seed", range(200))
def test_sherman_morrison_matches_dense_solve(seed):
    rng = np.random.default_rng(seed)
    g, s2, err, a, P = random_instance(rng)
    gamma = rng.uniform(0.1, 2.0) * maxmin_gamma(g, s2, err, a, P)[0]
    A = power_matrix(gamma, g, err, a)
    beta = np.linalg.solve(A, s2)
    feasible, power = maxmin_power_condition(gamma, g, s2, err, a, P)
    if np.all(beta > 0):
        assert power == pytest.approx(beta.sum(), rel=1e-9)
        assert feasible == (beta.sum() <= P)
    else:
        assert not feasible and power == np.inf


# -- power loading -----------------------------------------------------------

def test_loading_without_scaling_is_diagonal():
    g, s2 = np.array([1.0, 4.0, 2.0]), np.array([1.0, 1.0, 3.0])
    beta = solve_power_loading(2.0, g, s2, [0.3] * 3, 0.0)
    np.testing.assert_allclose(beta, 2.0 * s2 / g)


def test_loading_single_user():
    assert solve_power_loading(3.0, [2.0], [0.5], [0.1], 7.0)[0] == pytest.approx(0.75)


@pytest.mark.parametrize("seed", range(10))
def test_loading_meets_every_constraint_with_equality(seed):
    rng = np.random.default_rng(seed)
    g, s2, err, a, P = random_instance(rng, K=3)
    gamma, beta = maxmin_gamma(g, s2, err, a, P)
    gamma *= 0.7
    beta = solve_power_loading(gamma, g, s2, err, a, P)
    leak = a * err * (beta.sum() - beta)
    np.testing.assert_allclose(g * beta / (leak + s2), gamma, rtol=1e-8)


def test_loading_beyond_spectral_limit_raises():
    # 1/gamma <= t: rank-one perturbation makes the loads negative
    with pytest.raises(InfeasibleTargetError):
        solve_power_loading(10.0, [1, 1], [1, 1], [0.2, 0.2], 1.0)


# -- bisection ---------------------------------------------------------------

def test_maxmin_single_user_closed_form():
    gamma, beta = maxmin_gamma([2.0], [0.1], [0.0], 0.0, 5.0)
    assert gamma == pytest.approx(5.0 * 2.0 / 0.1, rel=1e-8)
    assert beta[0] == pytest.approx(5.0, rel=1e-7)


@pytest.mark.parametrize("seed", range(10))
def test_maxmin_without_scaling_closed_form(seed):
    rng = np.random.default_rng(seed)
    g, s2, err, _, P = random_instance(rng)
    gamma, _ = maxmin_gamma(g, s2, err, 0.0, P)
    assert gamma == pytest.approx(P / np.sum(s2 / g), rel=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_maxmin_matches_lp_oracle(seed):
    rng = np.random.default_rng(seed)
    g, s2, err, _, P = random_instance(rng, K=3, a=5.0)
    gamma, _ = maxmin_gamma(g, s2, err, 5.0, P, tol=1e-10)
    assert gamma == pytest.approx(lp_maxmin_gamma(g, s2, err, 5.0, P), rel=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_maxmin_uses_full_power(seed):
    rng = np.random.default_rng(seed)
    g, s2, err, a, P = random_instance(rng)
    tol = 1e-8
    gamma, beta = maxmin_gamma(g, s2, err, a, P, tol=tol)
    assert beta.sum() == pytest.approx(P, rel=10 * tol)
    # on the boundary the scalar condition and the true total power coincide
    assert eq17_lhs(gamma, g, s2, err, a, P) == pytest.approx(beta.sum(), rel=10 * tol)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_rate_falls_as_robustness_grows(seed):
    rng = np.random.default_rng(seed)
    g, s2, err, _, P = random_instance(rng)
    gammas = [maxmin_gamma(g, s2, err, a, P)[0] for a in (0.0, 1.0, 5.0, 20.0, 50.0)]
    assert np.all(np.diff(gammas) <= 1e-7 * gammas[0])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_total_power_increases_with_target_and_scale(seed):
    rng = np.random.default_rng(seed)
    g, s2, err, a, P = random_instance(rng)
    g_star = maxmin_gamma(g, s2, err, a, P)[0]
    powers = [maxmin_power_condition(x * g_star, g, s2, err, a, P)[1] for x in (0.2, 0.5, 0.9)]
    assert np.all(np.diff(powers) > 0)
    by_a = [maxmin_power_condition(0.5 * g_star, g, s2, err, s, P)[1] for s in (0.5 * a, a)]
    assert by_a[1] >= by_a[0] * (1 - 1e-12)


def test_maxmin_design_is_zero_forcing_and_within_budget():
    rng = np.random.default_rng(3)
    h = 1e-5 * crandn(rng, (3, 8))
    d = maxmin_design(h, 1e-12, 1e-13, 2.0, 40.0)
    assert d.check_zf(h)
    assert d.powers.sum() <= 40.0 * (1 + 1e-9)
    assert np.all(signal_gains(h, d.directions) > 0)
