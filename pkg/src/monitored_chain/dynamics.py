"""Evolution of the per-wavevector correlation matrices.

``sigma(k, t) = 1/2 <{Phi(k), Phi(k)^dagger}>`` in the canonical basis
``Phi = W^{-1} Psi`` obeys a matrix Riccati equation.  Writing
``sigma_s = sigma - I/2`` and ``Z = X - i Y``,

.. math::

    \\dot\\sigma_s = i C X \\sigma_s - i \\sigma_s X C
        - 2 \\sigma_s Y \\sigma_s - \\{\\sigma_s, Y\\},

so ``sigma = I/2`` is stationary.  The equation in this form relies on the
lower-left block of ``Z`` vanishing; :func:`riccati_rhs_general` holds in any
canonical basis and is used for cross-checks.

The slow-mode approximation keeps only the diagonal of ``Z`` restricted to
the gapless bands, where the flow is solved in closed form
(:func:`slow_mode_exact`).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .bloch import CanonicalForm, canonical_forms, signature
from .errors import NonPhysicalStateError, SingularMatrixError, StepSizeError
from .model import ChainConfig, InitialState

logger = logging.getLogger(__name__)

DT_CAP = 0.02
DT_SAFETY = 0.05


def _dag(a):
    return np.swapaxes(a.conj(), -1, -2)


def riccati_rhs(sigma_s, X, Y, C):
    """Right side of the shifted Riccati equation; broadcasts over leading axes."""
    CX = C @ X
    XC = X @ C
    sY = sigma_s @ Y
    return 1j * (CX @ sigma_s - sigma_s @ XC) - 2 * sY @ sigma_s - sY - Y @ sigma_s


def riccati_rhs_general(sigma, X, Y, C):
    """Riccati flow of the full ``sigma`` valid in any canonical basis.

    ``d sigma/dt = i C X sigma - i sigma X C - 2 sigma Y sigma + C Y C / 2``.
    """
    return (
        1j * (C @ X @ sigma - sigma @ X @ C)
        - 2 * sigma @ Y @ sigma
        + 0.5 * C @ Y @ C
    )


@dataclass
class CorrelationField:
    """Correlation matrices ``sigma(k)`` on the mesh at one time, stacked ``(nk, 2R, 2R)``."""

    k: np.ndarray
    sigma: np.ndarray
    t: float = 0.0

    @property
    def R(self) -> int:
        return self.sigma.shape[-1] // 2

    @property
    def sigma_s(self) -> np.ndarray:
        return self.sigma - 0.5 * np.eye(2 * self.R)

    def hermiticity_error(self) -> float:
        return float(np.abs(self.sigma - _dag(self.sigma)).max())

    def physicality_margin(self) -> float:
        """Smallest eigenvalue of ``sigma -+ C/2`` (both must be >= 0)."""
        C = signature(self.R)
        herm = (self.sigma + _dag(self.sigma)) / 2
        lo = min(np.linalg.eigvalsh(herm - C / 2).min(), np.linalg.eigvalsh(herm + C / 2).min())
        return float(lo)


def initial_sigma_psi(omega0: float, R: int) -> np.ndarray:
    """Spinor-basis correlations of the product ground state of frequency ``omega0``.

    Every site has ``<x^2> = 1/(2 omega0)`` and ``<p^2> = omega0/2``.  In terms
    of ``a = (x + i p)/sqrt(2)`` this gives ``<a^dagger a> + 1/2 = (<x^2> +
    <p^2>)/2`` and ``<a a> = (<x^2> - <p^2>)/2`` on every site, hence the same
    at every ``k`` (pairing ``k`` with ``-k``).
    """
    state = InitialState(omega0)
    diag = 0.5 * (state.xx + state.pp)
    pair = 0.5 * (state.xx - state.pp)
    eye = np.eye(R)
    return np.block([[diag * eye, pair * eye], [pair * eye, diag * eye]]).astype(complex)


def to_phi(sigma_psi, forms):
    """``sigma_Phi = W^{-1} sigma_Psi W^{-dagger}`` per mesh point."""
    Winv = np.stack([f.W_inv for f in forms])
    return Winv @ sigma_psi @ _dag(Winv)


def to_psi(sigma_phi, forms):
    W = np.stack([f.W for f in forms])
    return W @ sigma_phi @ _dag(W)


def generator_stack(forms):
    """``(X, Y)`` stacked over the mesh from the canonical forms."""
    X = np.stack([f.X for f in forms])
    Y = np.stack([f.Y for f in forms])
    return X, Y


def initial_field(config: ChainConfig, forms=None) -> CorrelationField:
    forms = canonical_forms(config) if forms is None else forms
    sigma_psi = initial_sigma_psi(config.omega0, config.R)
    sigma = to_phi(sigma_psi[None], forms)
    k = np.array([f.k for f in forms])
    return CorrelationField(k, (sigma + _dag(sigma)) / 2, 0.0)


def stable_step(X, Y) -> float:
    """``min(0.02, 0.05 / max(|X|, |Y|))`` with spectral norms over the mesh."""
    norm = max(np.linalg.norm(X, ord=2, axis=(-2, -1)).max(), np.linalg.norm(Y, ord=2, axis=(-2, -1)).max())
    return min(DT_CAP, DT_SAFETY / norm) if norm > 0 else DT_CAP


@dataclass
class Trajectory:
    """Correlation fields sampled at ``times``; ``sigma`` has shape ``(nt, nk, 2R, 2R)``."""

    k: np.ndarray
    times: np.ndarray
    sigma: np.ndarray
    dt: float
    error_estimate: float | None = None
    hermiticity_drift: float = 0.0
    meta: dict = field(default_factory=dict)

    def at(self, index: int) -> CorrelationField:
        return CorrelationField(self.k, self.sigma[index], float(self.times[index]))

    def __len__(self) -> int:
        return len(self.times)


def _rk4(s, dt, X, Y, C):
    k1 = riccati_rhs(s, X, Y, C)
    k2 = riccati_rhs(s + 0.5 * dt * k1, X, Y, C)
    k3 = riccati_rhs(s + 0.5 * dt * k2, X, Y, C)
    k4 = riccati_rhs(s + dt * k3, X, Y, C)
    return s + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _run(s0, X, Y, C, times, dt):
    out = np.empty((len(times),) + s0.shape, dtype=complex)
    s = s0.copy()
    t = 0.0
    drift = 0.0
    i0 = 0
    if len(times) and times[0] == 0:
        out[0] = s
        i0 = 1
    for i in range(i0, len(times)):
        span = times[i] - t
        n = max(1, math.ceil(span / dt - 1e-9))
        h = span / n
        for _ in range(n):
            s = _rk4(s, h, X, Y, C)
            asym = float(np.abs(s - _dag(s)).max())
            drift = max(drift, asym / h)
            s = (s + _dag(s)) / 2
        t = times[i]
        out[i] = s
    return out, drift


def integrate_riccati(
    field: CorrelationField,
    X,
    Y,
    times,
    dt: float | None = None,
    verify: bool = True,
    drift_tol: float = 1e-8,
    physical_tol: float = 1e-8,
    accuracy: float | None = None,
    max_refinements: int = 6,
) -> Trajectory:
    """Fixed-step RK4 for every mesh point at once.

    Parameters
    ----------
    field : CorrelationField
        Initial condition at ``t = field.t`` (taken as 0).
    X, Y : ndarray, shape (nk, 2R, 2R)
        Hermitian parts of ``Z(k)``.
    times : array
        Output times, non-decreasing and >= 0.
    dt : float, optional
        Step; defaults to :func:`stable_step`.  A larger value raises
        :class:`StepSizeError`.
    verify : bool
        Repeat with ``dt/2``; the finer run is returned and the largest
        difference between the two is reported as ``error_estimate``.
    accuracy : float, optional
        With ``verify``, keep halving the step (at most ``max_refinements``
        times) until the Richardson estimate ``|fine - coarse| / 15`` of the
        returned run's error is below ``accuracy``.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or (len(times) and times[0] < 0):
        raise ValueError("output times must be non-decreasing and non-negative")
    dt_max = stable_step(X, Y)
    if dt is None:
        dt = dt_max
    elif dt > dt_max * (1 + 1e-12):
        raise StepSizeError(f"dt={dt:g} exceeds the stable bound {dt_max:g}")
    C = signature(field.R)
    s0 = field.sigma_s
    out, drift = _run(s0, X, Y, C, times, dt)
    if drift > drift_tol:
        raise StepSizeError(f"Hermiticity drift {drift:.2e} per unit time exceeds {drift_tol:g}")
    error = None
    tol = physical_tol
    if verify:
        for refinement in range(max_refinements + 1):
            fine, _ = _run(s0, X, Y, C, times, dt / 2)
            error = float(np.abs(fine - out).max())
            # keep the more accurate run; the difference bounds the coarse error
            out, dt = fine, dt / 2
            if accuracy is None or error / 15 <= accuracy:
                break
        else:
            logger.warning(
                "RK4 error estimate %.2e above accuracy %g after %d refinements",
                error / 15,
                accuracy,
                max_refinements,
            )
        tol = max(tol, error)
    sigma = out + 0.5 * np.eye(2 * field.R)
    traj = Trajectory(field.k, times, sigma, dt, error, drift)
    margin = min(traj.at(i).physicality_margin() for i in range(len(times)))
    if margin < -tol:
        raise NonPhysicalStateError(f"uncertainty relation violated by {-margin:.2e}")
    traj.meta["physicality_margin"] = margin
    return traj


def riccati_exact(sigma0, X, Y, C, t):
    """Exact solution of the general Riccati flow by linearisation.

    With ``sigma = U V^{-1}`` the pair ``(U, V)`` obeys a linear equation with
    generator ``[[i C X, C Y C / 2], [2 Y, i X C]]`` (single mesh point).
    Meant as an oracle for moderate ``t``.
    """
    n = sigma0.shape[-1]
    G = np.block([[1j * C @ X, 0.5 * C @ Y @ C], [2 * Y, 1j * X @ C]])
    P = sla.expm(G * t)
    U = P[:n, :n] @ sigma0 + P[:n, n:]
    V = P[n:, :n] @ sigma0 + P[n:, n:]
    return np.linalg.solve(V.T, U.T).T


@dataclass
class SlowModeState:
    """Diagonal slow-mode data restricted to the gapless bands.

    ``eps - i Lam = [E_1(k)..E_{R-1}(k), E_1(-k)..E_{R-1}(-k)]`` per mesh point.
    """

    k: np.ndarray
    eps: np.ndarray
    Lam: np.ndarray
    sigma0: np.ndarray

    @property
    def C(self) -> np.ndarray:
        return signature(self.eps.shape[-1] // 2)

    def at(self, t: float) -> np.ndarray:
        return slow_mode_exact(self.sigma0, self.eps, self.Lam, t)


def gapless_indices(R: int) -> np.ndarray:
    return np.r_[np.arange(1, R), np.arange(R + 1, 2 * R)]


def project_gapless(sigma):
    """Drop the rows and columns of the gapped band (indices ``0`` and ``R``)."""
    sigma = np.asarray(sigma)
    idx = gapless_indices(sigma.shape[-1] // 2)
    return sigma[..., idx[:, None], idx[None, :]]


def slow_mode_state(field: CorrelationField, forms) -> SlowModeState:
    diag = np.stack([np.diag(f.Z) for f in forms])
    idx = gapless_indices(field.R)
    E = diag[:, idx]
    return SlowModeState(field.k, E.real, -E.imag, project_gapless(field.sigma))


def slow_mode_exact(sigma0, eps, Lam, t, cond_limit: float = 1e12):
    """Closed-form diagonal flow ``sigma = A - B [U sigma0 U^dagger + A]^{-1} B``.

    Here ``A = coth(Lam t)/2``, ``B = csch(Lam t)/2`` and ``U = exp(i eps C t)``.
    The expression is evaluated in the equivalent form

    ``sigma = T + (M + T) P^{-1} (1 - 4 T^2)``, with ``M = U sigma0 U^dagger``,
    ``T = tanh(Lam t / 2) / 2`` and ``P = 1 + 4 T^2 + 8 T M``,

    which only involves ``tanh`` and so stays finite in both the unitary limit
    ``Lam t -> 0`` (``sigma -> M``) and the strongly damped limit
    ``Lam t -> inf`` (``sigma -> 1/2``).  Broadcasts over leading mesh axes.
    """
    sigma0 = np.asarray(sigma0, dtype=complex)
    eps = np.asarray(eps, dtype=float)
    Lam = np.asarray(Lam, dtype=float)
    if np.any(Lam < -1e-14):
        raise ValueError("Lam must be non-negative")
    Lam = np.clip(Lam, 0.0, None)
    n = sigma0.shape[-1]
    if n == 0:
        return sigma0.copy()
    Cd = np.r_[np.ones(n // 2), -np.ones(n // 2)]
    phase = np.exp(1j * eps * Cd * t)
    M = phase[..., :, None] * sigma0 * phase[..., None, :].conj()
    T = 0.5 * np.tanh(Lam * t / 2)
    eye = np.eye(n)
    P = eye * (1 + 4 * T**2)[..., None, :] + 8 * T[..., :, None] * M
    if np.any(np.linalg.cond(P) > cond_limit):
        raise SingularMatrixError("bracketed matrix in the slow-mode solution is singular")
    N = M + T[..., None, :] * eye
    return T[..., None, :] * eye + N @ np.linalg.solve(P, eye * (1 - 4 * T**2)[..., :, None])


def slow_mode_direct(sigma0, eps, Lam, t):
    """Literal ``A - B [M + A]^{-1} B``; reference for moderate ``Lam t``."""
    n = sigma0.shape[-1]
    Cd = np.r_[np.ones(n // 2), -np.ones(n // 2)]
    phase = np.exp(1j * np.asarray(eps) * Cd * t)
    M = phase[..., :, None] * sigma0 * phase[..., None, :].conj()
    x = np.asarray(Lam) * t
    A = np.eye(n) * (0.5 / np.tanh(x))[..., None, :]
    B = np.eye(n) * (0.5 / np.sinh(x))[..., None, :]
    return A - B @ np.linalg.solve(M + A, B)


def density_decay(n0, Gamma, k, t):
    """``n0 e^{-4 Gamma k^2 t} / (1 + n0 (1 - e^{-4 Gamma k^2 t}))``; broadcasts."""
    n0 = np.asarray(n0, dtype=float)
    Gamma = np.asarray(Gamma, dtype=float)
    if np.any(n0 < 0):
        raise ValueError("n0 must be non-negative")
    if np.any(Gamma < 0):
        raise ValueError("Gamma must be non-negative")
    x = 4 * Gamma * np.asarray(k, dtype=float) ** 2 * np.asarray(t, dtype=float)
    decay = np.exp(-x)
    return n0 * decay / (1 + n0 * -np.expm1(-x))


def transient_time(gamma: float) -> float:
    """Default cutoff ``5 / gamma`` after which the gapped band is discarded."""
    return math.inf if gamma == 0 else 5.0 / gamma


def evolve(config: ChainConfig, times=None, dt=None, verify=True, accuracy=None):
    """Convenience: canonical forms, initial field and Riccati trajectory."""
    forms = canonical_forms(config)
    field0 = initial_field(config, forms)
    X, Y = generator_stack(forms)
    times = config.t_grid if times is None else times
    return integrate_riccati(field0, X, Y, times, dt=dt, verify=verify, accuracy=accuracy), forms


def slow_mode_trajectory(config: ChainConfig, times=None, forms=None) -> Trajectory:
    """Trajectory from the closed-form slow-mode flow.

    The gapless block follows :func:`slow_mode_exact`; the gapped band (which
    relaxes on the time scale :func:`transient_time`) is set to its stationary
    value ``1/2`` with no coherence to the gapless bands.
    """
    forms = canonical_forms(config) if forms is None else forms
    field0 = initial_field(config, forms)
    state = slow_mode_state(field0, forms)
    times = config.t_grid if times is None else np.asarray(times, dtype=float)
    R = config.R
    idx = gapless_indices(R)
    base = np.broadcast_to(0.5 * np.eye(2 * R), field0.sigma.shape).astype(complex)
    sigma = np.empty((len(times),) + field0.sigma.shape, dtype=complex)
    for i, t in enumerate(times):
        sigma[i] = base
        sigma[i][:, idx[:, None], idx[None, :]] = state.at(float(t))
    traj = Trajectory(field0.k, times, sigma, dt=0.0, meta={"method": "slow-exact"})
    traj.meta["physicality_margin"] = min(traj.at(i).physicality_margin() for i in range(len(times)))
    return traj
