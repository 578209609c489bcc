import numpy as np
import pytest

from monitored_chain.dynamics import evolve
from monitored_chain.entropy import (
    asymptotic_coefficient,
    assemble_from_psi,
    check_quadrature,
    covariance_to_psi,
    default_region,
    entropy_from_nu,
    entropy_trace,
    fit_sqrt,
    gaussian_entropy,
    loglog_slope,
    max_velocity,
    pair_entropy,
    pair_function,
    peak_time,
    qp_entropy,
    qp_grid,
    qp_inputs,
    scaling_collapse,
    steady_state_entropy,
    symplectic_eigenvalues,
    symplectic_form,
)
from monitored_chain.errors import AssemblyError, ConvergenceError, FitWindowError, NonPhysicalStateError
from monitored_chain.model import ChainConfig, initial_covariance
from monitored_chain.oracle import realspace_riccati


def test_entropy_of_single_mode():
    assert entropy_from_nu([0.5]) == 0.0
    nu = 1.0
    expected = 1.5 * np.log(1.5) - 0.5 * np.log(0.5)
    assert entropy_from_nu([nu]) == pytest.approx(expected)
    with pytest.raises(NonPhysicalStateError):
        entropy_from_nu([0.3])


def test_pair_entropy():
    np.testing.assert_allclose(pair_entropy([0.0, 1.0]), [0.0, 2 * np.log(2)])


def test_thermal_mode_symplectic_spectrum():
    # two-mode squeezed vacuum: each half is thermal with nu = cosh(2r)/2
    r = 0.4
    c, s = np.cosh(2 * r) / 2, np.sinh(2 * r) / 2
    G = np.array([[c, s, 0, 0], [s, c, 0, 0], [0, 0, c, -s], [0, 0, -s, c]])
    np.testing.assert_allclose(symplectic_eigenvalues(G), [0.5, 0.5], atol=1e-12)
    sub = G[np.ix_([0, 2], [0, 2])]
    np.testing.assert_allclose(symplectic_eigenvalues(sub), [c])
    assert symplectic_form(1).tolist() == [[0, 1], [-1, 0]]


def test_product_state_has_zero_entropy(small_config):
    traj, forms = evolve(small_config, times=[0.0])
    assert entropy_trace(traj, forms, default_region(small_config)).S[0] < 1e-10


def test_assembly_round_trip(rng):
    cfg = ChainConfig(L=24, R=3, gamma=0.5, omega0=2.0)
    traj, forms = evolve(cfg, times=[0.0, 2.0])
    W = np.stack([f.W for f in forms])
    sigma_psi = W @ traj.sigma[1] @ np.swapaxes(W.conj(), -1, -2)
    full = assemble_from_psi(sigma_psi, cfg.n_cells).gamma_A
    np.testing.assert_allclose(covariance_to_psi(full, cfg.R), sigma_psi, atol=1e-12)
    # the initial state maps back to the product covariance
    sigma0 = W @ traj.sigma[0] @ np.swapaxes(W.conj(), -1, -2)
    np.testing.assert_allclose(assemble_from_psi(sigma0, cfg.n_cells).gamma_A, initial_covariance(cfg), atol=1e-12)


def test_assembly_rejects_inconsistent_field(rng):
    bad = rng.standard_normal((4, 4, 4)) + 1j * rng.standard_normal((4, 4, 4))
    with pytest.raises(AssemblyError):
        assemble_from_psi(bad, 2)


@pytest.mark.parametrize("R", [1, 2, 3])
def test_entropy_matches_real_space_riccati(R):
    cfg = ChainConfig(L=6 * R, R=R, m=1.0, gamma=0.7, omega0=2.5)
    times = np.array([0.0, 0.5, 1.5, 3.0])
    traj, forms = evolve(cfg, times=times)
    nA = default_region(cfg)
    S = entropy_trace(traj, forms, nA).S
    G = realspace_riccati(cfg, times, dt=2e-3)
    sites = np.r_[np.arange(nA * R), cfg.L + np.arange(nA * R)]
    ref = [gaussian_entropy(g[np.ix_(sites, sites)]) for g in G]
    np.testing.assert_allclose(S, ref, atol=1e-7)


def test_steady_state_entropy_is_area_law():
    base = ChainConfig(L=32, R=4, gamma=0.5)
    s32 = steady_state_entropy(base)
    s64 = steady_state_entropy(base.replace(L=64))
    assert s32 > 0
    assert s64 == pytest.approx(s32, rel=1e-3)


def test_qp_prediction_basic_properties():
    cfg = ChainConfig(L=128, R=4, gamma=0.5, omega0=4.0)
    inputs = qp_inputs(cfg)
    assert qp_entropy(inputs, 0.0) == 0.0
    ts = np.array([10.0, 40.0, 160.0])
    S = qp_entropy(inputs, ts)
    assert np.all(np.diff(S) > 0)
    total, per = qp_entropy(inputs, ts, per_band=True)
    np.testing.assert_allclose(per.sum(axis=1), total)
    # on a ring the finite prediction returns to zero pair weight after a full period
    tL = cfg.L / (2 * np.abs(inputs.v).max())
    assert qp_entropy(inputs, 0.5 * tL, L=cfg.L) <= qp_entropy(inputs, 0.5 * tL) + 1e-12
    assert check_quadrature(cfg, [10.0, 50.0]) < 1e-3


def test_qp_for_single_site_blocks_is_empty():
    inputs = qp_inputs(ChainConfig(L=16, R=1, gamma=0.5))
    assert inputs.v.shape[1] == 0
    assert qp_entropy(inputs, 50.0) == 0.0
    assert asymptotic_coefficient(inputs)[0] == 0.0


def test_qp_grid_refines_towards_zero():
    k = qp_grid(64, 20)
    assert np.all(np.diff(k) > 0)
    assert np.min(np.abs(k[k != 0])) == pytest.approx(1e-5)
    assert 0.0 in k and np.pi in k


def test_sqrt_coefficient_matches_small_k_integral():
    cfg = ChainConfig(L=128, R=4, gamma=0.5, omega0=4.0)
    inputs = qp_inputs(cfg, decay="expansion")
    b, b_j, g_j = asymptotic_coefficient(inputs)
    mask = np.abs(inputs.v0) > 1e-9
    predicted = [
        abs(inputs.v0[j]) / np.sqrt(inputs.Gamma[j]) * pair_function(inputs.nu[j]) / cfg.R for j in np.nonzero(mask)[0]
    ]
    np.testing.assert_allclose(b_j[mask], predicted, rtol=0.02)
    assert b == pytest.approx(b_j.sum())


def test_asymptotic_coefficient_detects_non_convergence():
    cfg = ChainConfig(L=128, R=4, gamma=0.5, omega0=4.0)
    with pytest.raises(ConvergenceError):
        asymptotic_coefficient(qp_inputs(cfg), t0=0.1, levels=3, rtol=1e-12, atol=0.0)


def test_fit_sqrt_recovers_parameters():
    t = np.linspace(1, 100, 200)
    S = 0.3 + 0.8 * np.sqrt(t)
    fit = fit_sqrt(t, S, (5, 90))
    assert fit.a == pytest.approx(0.3) and fit.b == pytest.approx(0.8)
    assert fit.rmse < 1e-12 and fit.alpha == pytest.approx(0.5, abs=1e-9)
    assert loglog_slope(t, S, 0.3, (5, 90)) == pytest.approx(0.5)
    assert fit.to_dict()["rmse_over_range"] < 1e-12
    with pytest.raises(FitWindowError):
        fit_sqrt(t, S, (5, 6))


def test_scaling_collapse_of_rescaled_curves():
    t = np.linspace(1, 100, 300)
    traces = [(t, a + b * np.sqrt(t)) for a, b in [(0.1, 1.0), (2.0, 0.3), (-1.0, 2.5)]]
    col = scaling_collapse(traces, (5, 90), labels=["x", "y", "z"])
    assert col.metric < 1e-10
    assert col.curves.shape == (3, 200)
    distorted = traces + [(t, 1.0 + t**0.8)]
    assert scaling_collapse(distorted, (5, 90)).relative_metric > 1e-3


def test_peak_time_parabolic_refinement():
    t = np.linspace(0, 10, 41)
    assert peak_time(t, -((t - 3.1) ** 2)) == pytest.approx(3.1)
    assert peak_time(t, t) == 10.0


def test_max_velocity_unmonitored_limit():
    cfg = ChainConfig(L=40, R=1, m=1.0, gamma=0.0)
    q = np.linspace(0, np.pi, 2001)
    expected = np.max(2 * np.sin(q) / np.sqrt(4 * np.sin(q / 2) ** 2 + 1))
    assert max_velocity(cfg) == pytest.approx(expected, rel=1e-3)
