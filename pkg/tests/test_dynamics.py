import numpy as np
import pytest

from monitored_chain.bloch import canonical_forms, signature
from monitored_chain.dynamics import (
    CorrelationField,
    density_decay,
    evolve,
    generator_stack,
    gapless_indices,
    initial_field,
    integrate_riccati,
    project_gapless,
    riccati_exact,
    riccati_rhs,
    riccati_rhs_general,
    slow_mode_direct,
    slow_mode_exact,
    slow_mode_state,
    slow_mode_trajectory,
    stable_step,
    to_phi,
    to_psi,
)
from monitored_chain.errors import StepSizeError
from monitored_chain.model import ChainConfig


@pytest.fixture
def setup(small_config):
    forms = canonical_forms(small_config)
    X, Y = generator_stack(forms)
    return small_config, forms, X, Y


def test_half_identity_is_stationary(setup):
    cfg, forms, X, Y = setup
    C = signature(cfg.R)
    zero = np.zeros_like(X)
    assert np.abs(riccati_rhs(zero, X, Y, C)).max() == 0
    half = np.broadcast_to(0.5 * np.eye(2 * cfg.R), X.shape)
    assert np.abs(riccati_rhs_general(half, X, Y, C)).max() < 1e-12


def test_shifted_and_general_forms_agree(setup, rng):
    cfg, forms, X, Y = setup
    C = signature(cfg.R)
    field = initial_field(cfg, forms)
    lhs = riccati_rhs(field.sigma_s, X, Y, C)
    rhs = riccati_rhs_general(field.sigma, X, Y, C)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_rk4_matches_exact_flow(setup):
    cfg, forms, X, Y = setup
    field = initial_field(cfg, forms)
    times = np.array([0.0, 0.5, 2.0, 5.0])
    traj = integrate_riccati(field, X, Y, times)
    C = signature(cfg.R)
    for i, t in enumerate(times):
        for n in range(0, len(forms), 3):
            exact = riccati_exact(field.sigma[n], X[n], Y[n], C, t)
            np.testing.assert_allclose(traj.sigma[i, n], exact, atol=1e-6)
    assert traj.error_estimate < 1e-5
    assert traj.meta["physicality_margin"] > -1e-8


def test_step_size_guard(setup):
    cfg, forms, X, Y = setup
    field = initial_field(cfg, forms)
    with pytest.raises(StepSizeError):
        integrate_riccati(field, X, Y, [0.0, 1.0], dt=10 * stable_step(X, Y))
    with pytest.raises(ValueError):
        integrate_riccati(field, X, Y, [1.0, 0.5])


def test_basis_round_trip(setup, rng):
    cfg, forms, _, _ = setup
    A = rng.standard_normal((len(forms), 8, 8)) + 1j * rng.standard_normal((len(forms), 8, 8))
    np.testing.assert_allclose(to_psi(to_phi(A, forms), forms), A, atol=1e-11)


def test_correlation_field_diagnostics(setup):
    cfg, forms, _, _ = setup
    field = initial_field(cfg, forms)
    assert field.hermiticity_error() < 1e-14
    assert field.physicality_margin() > -1e-10
    assert field.R == cfg.R
    np.testing.assert_allclose(field.sigma_s + 0.5 * np.eye(8), field.sigma)


def test_projection_drops_gapped_band():
    R = 4
    sigma = np.arange(64.0).reshape(8, 8)
    idx = gapless_indices(R)
    np.testing.assert_array_equal(idx, [1, 2, 3, 5, 6, 7])
    assert project_gapless(sigma).shape == (6, 6)
    assert project_gapless(np.zeros((3, 2, 2))).shape == (3, 0, 0)


def _diag_riccati(sigma0, eps, Lam, t, n=4000):
    """Reference: RK4 of the diagonal flow with Z = diag(eps - i Lam)."""
    C = np.diag(np.r_[np.ones(len(eps) // 2), -np.ones(len(eps) // 2)])
    X = np.diag(eps).astype(complex)
    Y = np.diag(Lam).astype(complex)
    return riccati_exact(sigma0, X, Y, C, t)


@pytest.mark.parametrize("t", [0.0, 0.3, 5.0, 60.0])
def test_slow_mode_closed_form(t, rng):
    eps = np.array([1.2, 0.7, 1.1, 0.9])
    Lam = np.array([0.05, 0.01, 0.03, 0.0])
    B = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    sigma0 = 0.5 * np.eye(4) + 0.2 * B @ B.conj().T
    exact = slow_mode_exact(sigma0, eps, Lam, t)
    np.testing.assert_allclose(exact, _diag_riccati(sigma0, eps, Lam, t), atol=1e-9)
    if t > 0 and Lam.min() > 0:
        np.testing.assert_allclose(exact, slow_mode_direct(sigma0, eps, Lam, t), atol=1e-9)


def test_slow_mode_unitary_limit_is_regular():
    eps = np.array([1.0, 2.0])
    sigma0 = np.array([[1.0, 0.3], [0.3, 1.0]], dtype=complex)
    out = slow_mode_exact(sigma0, eps, np.array([1e-17, 1e-17]), 3.0)
    phase = np.exp(1j * np.array([1.0, -2.0]) * 3.0)
    np.testing.assert_allclose(out, phase[:, None] * sigma0 * phase.conj()[None, :], atol=1e-12)


def test_slow_mode_damped_limit_is_regular():
    sigma0 = np.array([[1.0, 0.3], [0.3, 1.0]], dtype=complex)
    with np.errstate(over="raise", invalid="raise"):
        out = slow_mode_exact(sigma0, np.array([1.0, 2.0]), np.array([5.0, 9.0]), 1e3)
    np.testing.assert_allclose(out, np.eye(2) / 2, atol=1e-14)


def test_density_decay_from_pure_pair():
    n0, Gamma, k, t = 0.7, 0.02, 0.5, 40.0
    s = np.sqrt(n0 * (n0 + 1))
    sigma0 = np.array([[n0 + 0.5, s], [s, n0 + 0.5]], dtype=complex)
    out = slow_mode_exact(sigma0, np.array([1.0, 1.0]), np.full(2, Gamma * k**2), t)
    assert out[0, 0].real - 0.5 == pytest.approx(density_decay(n0, Gamma, k, t), rel=1e-12)


def test_density_decay_without_pair_coherence_halves_rate():
    n0, Gamma, k, t = 0.7, 0.02, 0.5, 40.0
    sigma0 = np.diag([n0 + 0.5, 0.7]).astype(complex)
    out = slow_mode_exact(sigma0, np.array([1.0, 1.0]), np.full(2, Gamma * k**2), t)
    assert out[0, 0].real - 0.5 == pytest.approx(density_decay(n0, Gamma / 2, k, t), rel=1e-12)


def test_density_decay_limits():
    assert density_decay(0.4, 0.1, 0.3, 0.0) == pytest.approx(0.4)
    assert density_decay(0.4, 0.0, 0.3, 10.0) == pytest.approx(0.4)
    assert density_decay(0.4, 0.1, 0.3, 1e6) < 1e-12
    with pytest.raises(ValueError):
        density_decay(-1.0, 0.1, 0.1, 1.0)
    with pytest.raises(ValueError):
        density_decay(1.0, -0.1, 0.1, 1.0)


def test_slow_mode_state_and_trajectory(setup):
    cfg, forms, _, _ = setup
    field = initial_field(cfg, forms)
    state = slow_mode_state(field, forms)
    assert state.eps.shape == (cfg.n_cells, 2 * cfg.R - 2)
    assert np.all(state.Lam > -1e-12)
    traj = slow_mode_trajectory(cfg, [0.0, 1.0, 4.0], forms)
    assert traj.meta["method"] == "slow-exact"
    assert traj.meta["physicality_margin"] > -1e-10
    np.testing.assert_allclose(project_gapless(traj.sigma[1]), state.at(1.0))
    np.testing.assert_allclose(traj.sigma[2][:, 0, 0], 0.5)


def test_slow_modes_track_riccati_at_small_k():
    cfg = ChainConfig(L=400, R=4, m=1.0, gamma=0.5, omega0=4.0)
    ks = np.array([0.05, 0.1])
    forms = canonical_forms(cfg, k_mesh=ks)
    field = initial_field(cfg, forms)
    X, Y = generator_stack(forms)
    times = np.array([0.0, 20.0, 60.0])
    traj = integrate_riccati(field, X, Y, times, verify=False)
    state = slow_mode_state(field, forms)
    for i, t in enumerate(times[1:], start=1):
        ric = np.diagonal(project_gapless(traj.sigma[i]), axis1=-2, axis2=-1).real
        slow = np.diagonal(state.at(t), axis1=-2, axis2=-1).real
        # populations agree up to the gapped-band transient
        np.testing.assert_allclose(slow, ric, atol=0.05)


def test_evolve_convenience(small_config):
    traj, forms = evolve(small_config, times=[0.0, 1.0])
    assert traj.sigma.shape == (2, small_config.n_cells, 8, 8)
    assert len(forms) == small_config.n_cells
    assert isinstance(traj.at(1), CorrelationField)
