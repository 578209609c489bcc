"""Randomised invariants of the canonical form, the Riccati flow and the slow-mode solution."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from monitored_chain.bloch import bloch_block, signature, triangularize
from monitored_chain.dynamics import density_decay, evolve, slow_mode_exact
from monitored_chain.entropy import assemble_from_psi, default_region, symplectic_eigenvalues
from monitored_chain.model import ChainConfig

EXAMPLES = 100

masses = st.floats(0.1, 3.0)
rates = st.floats(0.0, 5.0)


def canonical_residuals(R, m, gamma, k):
    """``(|W C W^dagger - C|, lower-triangle residual of Z)`` at one wavevector."""
    cfg = ChainConfig(L=R, R=R, m=m, gamma=gamma)
    form = triangularize(bloch_block(cfg, k))
    C = signature(R)
    return float(np.abs(form.W @ C @ form.W.conj().T - C).max()), form.lower_residual()


#: RK4 accuracy target; the default step alone leaves errors of order 1e-6
ACCURACY = 1e-9


def evolution_checks(cfg, t_max=2.0):
    """Hermiticity, smallest region ``nu``, largest full-chain ``|nu - 1/2|`` and the
    integrator's own error estimate along a short run."""
    times = np.linspace(0.0, t_max, 5)
    traj, forms = evolve(cfg, times=times, accuracy=ACCURACY)
    W = np.stack([f.W for f in forms])
    herm = float(np.abs(traj.sigma - np.swapaxes(traj.sigma.conj(), -1, -2)).max())
    nu_min, purity = np.inf, 0.0
    for i in range(len(traj)):
        sig = W @ traj.sigma[i] @ np.swapaxes(W.conj(), -1, -2)
        region = assemble_from_psi(sig, default_region(cfg)).gamma_A
        nu_min = min(nu_min, symplectic_eigenvalues(region, clip=False).min())
        full = assemble_from_psi(sig, cfg.n_cells).gamma_A
        purity = max(purity, np.abs(symplectic_eigenvalues(full, clip=False) - 0.5).max())
    return herm, float(nu_min), float(purity), traj.error_estimate


def pair_density_error(n0, Gamma, k, t):
    """Difference of the density formula and the slow-mode solution for a pure pair,
    relative to the density (floored where it has decayed away)."""
    s = np.sqrt(n0 * (n0 + 1))
    sigma0 = np.array([[n0 + 0.5, s], [s, n0 + 0.5]], dtype=complex)
    out = slow_mode_exact(sigma0, np.array([1.0, 1.0]), np.full(2, Gamma * k**2), t)
    exact = out[0, 0].real - 0.5
    formula = density_decay(n0, Gamma, k, t)
    return abs(exact - formula) / max(abs(formula), 1e-5)


@settings(max_examples=EXAMPLES)
@given(R=st.integers(1, 6), m=masses, gamma=rates, k=st.floats(-np.pi, np.pi))
def test_canonical_form_is_symplectic_and_triangular(R, m, gamma, k):
    unitarity, lower = canonical_residuals(R, m, gamma, k)
    assert unitarity < 1e-8
    assert lower < 1e-8


chains = st.builds(
    lambda R, cells, m, gamma, omega0: ChainConfig(L=R * cells, R=R, m=m, gamma=gamma, omega0=omega0),
    R=st.integers(1, 4),
    cells=st.integers(2, 8),
    m=masses,
    gamma=rates,
    omega0=st.floats(0.3, 6.0),
)


@settings(max_examples=EXAMPLES)
@given(cfg=chains)
def test_evolution_is_hermitian_physical_and_pure(cfg):
    herm, nu_min, purity, error = evolution_checks(cfg)
    assert herm < 1e-12
    assert nu_min >= 0.5 - 1e-8
    # the conditional state of a pure initial state stays pure for any rate
    assert purity < 1e-8


@settings(max_examples=EXAMPLES)
@given(cfg=chains.map(lambda c: c.replace(gamma=0.0, omega0=c.omega0)))
def test_unmonitored_evolution_is_pure(cfg):
    _, _, purity, _ = evolution_checks(cfg)
    assert purity < 1e-8


@settings(max_examples=EXAMPLES)
@given(
    n0=st.floats(0.0, 5.0),
    Gamma=st.floats(0.0, 2.0),
    k=st.floats(0.0, np.pi),
    t=st.floats(0.0, 200.0),
)
def test_density_formula_matches_slow_mode_solution(n0, Gamma, k, t):
    assert pair_density_error(n0, Gamma, k, t) < 1e-10
