"""Entanglement entropy from correlation data and the quasiparticle picture.

The exact route assembles the real-space covariance of a region from the
correlation field and evaluates the Gaussian (symplectic) entropy.  The
quasiparticle route integrates decaying pair densities carried at the band
velocities:

.. math::

    S_A(t) = \\frac{1}{R} \\sum_{j>0} \\int_{-\\pi}^{\\pi} \\frac{dk}{2\\pi}
        \\, w_j(k, t) \\, s\\big(n_j(k, t)\\big), \\qquad
    s(n) = (n+1)\\ln(n+1) - n \\ln n,

with ``w = 2 |v_j(k)| t`` on an infinite chain or ``min(d, L - d)``,
``d = 2 |v_j(k)| t mod L``, on a ring of ``L`` sites.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .bloch import canonical_forms, group_velocity, track_bands
from .dynamics import (
    CorrelationField,
    Trajectory,
    density_decay,
    initial_field,
    to_psi,
)
from .errors import (
    AssemblyError,
    ConvergenceError,
    FitWindowError,
    NonPhysicalStateError,
    QuadratureError,
)
from .model import ChainConfig

logger = logging.getLogger(__name__)


def default_region(config: ChainConfig) -> int:
    """Half chain rounded down to whole blocks; returned as a number of cells."""
    return (config.L // 2) // config.R


def symplectic_form(n: int) -> np.ndarray:
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass
class CovarianceAssembly:
    """Covariance of ``(x_A, p_A)`` for a contiguous region of ``n_sites`` sites."""

    gamma_A: np.ndarray
    n_sites: int
    residue: float = 0.0

    @property
    def omega(self) -> np.ndarray:
        return symplectic_form(self.n_sites)

    def symplectic_eigenvalues(self, clip: bool = True) -> np.ndarray:
        return symplectic_eigenvalues(self.gamma_A, clip=clip)


def realspace_blocks(sigma_psi: np.ndarray):
    """Translation-invariant ``N_d``, ``An_d`` (shape ``(..., n_cells, R, R)``) from ``sigma_Psi(k)``.

    ``N_d[i, j] = 1/2 <{a_{b+d,i}, a_{b,j}^dagger}>`` and
    ``An_d[i, j] = 1/2 <{a_{b+d,i}, a_{b,j}}>``; the mesh axis is ``-3`` and
    in FFT order.
    """
    R = sigma_psi.shape[-1] // 2
    Nk = np.swapaxes(sigma_psi[..., :R, :R], -1, -2)
    Ak = np.swapaxes(sigma_psi[..., R:, :R], -1, -2)
    return np.fft.ifft(Nk, axis=-3), np.fft.ifft(Ak, axis=-3)


def _toeplitz(blocks, n_cells_A):
    """Dense ``(n R, n R)`` matrix with block ``(b, b')`` equal to ``blocks[(b - b') mod Nc]``."""
    Nc, R = blocks.shape[-3], blocks.shape[-1]
    b = np.arange(n_cells_A)
    idx = (b[:, None] - b[None, :]) % Nc
    big = blocks[..., idx, :, :]  # (..., nA, nA, R, R)
    big = np.moveaxis(big, -2, -3)  # (..., nA, R, nA, R)
    shape = big.shape[:-4] + (n_cells_A * R, n_cells_A * R)
    return big.reshape(shape)


def assemble_from_psi(sigma_psi, n_cells_A: int, tol: float = 1e-8) -> CovarianceAssembly:
    """Real-space covariance of the first ``n_cells_A`` cells from ``sigma_Psi(k)`` on the mesh.

    The residue measures how far ``N`` is from Hermitian and ``An`` from
    symmetric, i.e. how badly the fields at ``k`` and ``-k`` disagree; above
    ``tol`` the field is not a real-space state and :class:`AssemblyError` is
    raised.  Fields from the slow-mode flow fail this check by construction:
    the flow is diagonal in each wavevector's own canonical basis, and those
    bases are not partners under ``k -> -k``.
    """
    Nd, Ad = realspace_blocks(sigma_psi)
    N = _toeplitz(Nd, n_cells_A)
    An = _toeplitz(Ad, n_cells_A)
    residue = max(
        float(np.abs(N - N.conj().T).max(initial=0.0)),
        float(np.abs(An - An.T).max(initial=0.0)),
    )
    if residue > tol:
        raise AssemblyError(f"assembled correlators inconsistent (residue {residue:.2e})")
    gxx = N.real + An.real
    gpp = N.real - An.real
    gxp = An.imag - N.imag
    gamma = np.block([[gxx, gxp], [gxp.T, gpp]])
    gamma = (gamma + gamma.T) / 2
    return CovarianceAssembly(gamma, N.shape[0], residue)


def assemble_covariance(field: CorrelationField, forms, n_cells_A: int, tol: float = 1e-8):
    """Covariance of a block-aligned region from a field in the canonical basis."""
    sigma_psi = to_psi(field.sigma, forms)
    return assemble_from_psi(sigma_psi, n_cells_A, tol)


def covariance_to_psi(gamma: np.ndarray, R: int) -> np.ndarray:
    """Inverse of the assembly for a translation-invariant full-chain covariance.

    ``gamma`` is ``2L x 2L`` over ``(x_1..x_L, p_1..p_L)``; returns ``sigma_Psi(k)``
    on the mesh in FFT order.
    """
    L = gamma.shape[0] // 2
    Nc = L // R
    gxx, gxp = gamma[:L, :L], gamma[:L, L:]
    gpx, gpp = gamma[L:, :L], gamma[L:, L:]
    N = 0.5 * (gxx + gpp) + 0.5j * (gpx - gxp)
    An = 0.5 * (gxx - gpp) + 0.5j * (gxp + gpx)
    # first block column: blocks (b, 0) for all b
    Nd = N[:, :R].reshape(Nc, R, R)
    Ad = An[:, :R].reshape(Nc, R, R)
    Nk = np.fft.fft(Nd, axis=0)
    Ak = np.fft.fft(Ad, axis=0)
    # An(-k) enters the top-right block; index -k in FFT order is (-n) mod Nc
    minus = (-np.arange(Nc)) % Nc
    top = np.concatenate([np.swapaxes(Nk, -1, -2), Ak.conj()], -1)
    bottom = np.concatenate([np.swapaxes(Ak, -1, -2), Nk[minus]], -1)
    return np.concatenate([top, bottom], -2)


def symplectic_eigenvalues(gamma, clip: bool = True, tol: float = 1e-6) -> np.ndarray:
    """Symplectic spectrum from the Hermitian matrix ``G^{1/2} (i Omega) G^{1/2}``."""
    n = gamma.shape[0] // 2
    if n == 0:
        return np.zeros(0)
    w, U = np.linalg.eigh(gamma)
    if w.min() <= 0:
        raise NonPhysicalStateError("covariance is not positive definite")
    root = (U * np.sqrt(w)) @ U.T
    M = root @ (1j * symplectic_form(n)) @ root
    ev = np.linalg.eigvalsh((M + M.conj().T) / 2)
    nu = np.sort(ev[n:])
    if nu.min() < 0.5 - tol:
        raise NonPhysicalStateError(f"symplectic eigenvalue {nu.min():.8f} below 1/2")
    return np.maximum(nu, 0.5) if clip else nu


def entropy_from_nu(nu) -> float:
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < 0.5 - 1e-6):
        raise NonPhysicalStateError(f"symplectic eigenvalue {nu.min():.8f} below 1/2")
    nu = np.maximum(nu, 0.5)
    return float(np.sum(xlogy(nu + 0.5, nu + 0.5) - xlogy(nu - 0.5, nu - 0.5)))


def gaussian_entropy(cov: CovarianceAssembly | np.ndarray) -> float:
    gamma = cov.gamma_A if isinstance(cov, CovarianceAssembly) else np.asarray(cov)
    return entropy_from_nu(symplectic_eigenvalues(gamma))


def pair_entropy(n) -> np.ndarray:
    """``s(n) = (n+1) ln(n+1) - n ln n``."""
    n = np.asarray(n, dtype=float)
    return xlogy(n + 1, n + 1) - xlogy(n, n)


@dataclass
class EntropyTrace:
    times: np.ndarray
    S: np.ndarray
    method: str
    params: dict = field(default_factory=dict)

    def rows(self):
        for t, s in zip(self.times, self.S):
            yield {"t": float(t), "S_A": float(s), "method": self.method}


def entropy_trace(traj: Trajectory, forms, n_cells_A: int, params=None) -> EntropyTrace:
    """Exact region entropy along a Riccati trajectory."""
    W = np.stack([f.W for f in forms])
    S = np.empty(len(traj))
    for i in range(len(traj)):
        sigma_psi = W @ traj.sigma[i] @ np.swapaxes(W.conj(), -1, -2)
        S[i] = gaussian_entropy(assemble_from_psi(sigma_psi, n_cells_A))
    return EntropyTrace(np.asarray(traj.times), S, "riccati", dict(params or {}))


def steady_state_entropy(config: ChainConfig, n_cells_A: int | None = None, forms=None) -> float:
    """Area-law entropy of the stationary state ``sigma = I/2``."""
    forms = canonical_forms(config) if forms is None else forms
    n_cells_A = default_region(config) if n_cells_A is None else n_cells_A
    R = config.R
    half = np.broadcast_to(0.5 * np.eye(2 * R), (len(forms), 2 * R, 2 * R)).astype(complex)
    field0 = CorrelationField(config.k_mesh, half)
    return gaussian_entropy(assemble_covariance(field0, forms, n_cells_A))


@dataclass
class QPInputs:
    """Quasiparticle data for the gapless bands on a sorted ``k`` grid over ``(-pi, pi]``.

    Arrays ``v``, ``decay``, ``n0`` have shape ``(nk, R - 1)``; ``decay`` is
    the rate ``Lambda_j(k)`` entering ``n0 e^{-4 Lambda t} / (1 + n0(1 - e^{-4 Lambda t}))``.
    """

    R: int
    k: np.ndarray
    v: np.ndarray
    decay: np.ndarray
    n0: np.ndarray
    Gamma: np.ndarray
    nu: np.ndarray
    v0: np.ndarray
    decay_mode: str = "exact"

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights for ``int dk / 2 pi`` on the (periodic) grid."""
        k = self.k
        ext = np.r_[k[-1] - 2 * np.pi, k, k[0] + 2 * np.pi]
        return (ext[2:] - ext[:-2]) / 2 / (2 * np.pi)

    def densities(self, t: float) -> np.ndarray:
        return density_decay(self.n0, self.decay, 1.0, t)


def qp_grid(n_uniform: int = 1024, n_refine: int = 200, k_min: float = 1e-5, k_ref: float = 0.3):
    """Uniform grid on ``(-pi, pi]`` augmented by geometric points towards ``k = 0``."""
    uniform = -np.pi + 2 * np.pi * (np.arange(n_uniform) + 1) / n_uniform
    geo = np.geomspace(k_min, k_ref, n_refine)
    return np.unique(np.r_[uniform, geo, -geo, 0.0])


def qp_inputs(
    config: ChainConfig, k=None, decay: str = "exact", expansion=None, include_gapped: bool = False
) -> QPInputs:
    """Collect velocities, decay rates and initial densities of the gapless bands.

    ``decay="exact"`` uses ``-Im E_j(k)``; ``decay="expansion"`` uses
    ``Gamma_j k^2`` from the small-``k`` fit.  ``include_gapped`` adds band
    0 (meaningful for the unmonitored chain, where it is not gapped).
    """
    from .bloch import band_expansion

    if decay not in ("exact", "expansion"):
        raise ValueError("decay must be 'exact' or 'expansion'")
    R = config.R
    k = qp_grid() if k is None else np.sort(np.asarray(k, dtype=float))
    expansion = band_expansion(config) if expansion is None else expansion
    first = 0 if include_gapped else 1
    if R == first:
        empty = np.zeros((len(k), 0))
        return QPInputs(R, k, empty, empty, empty, np.zeros(0), np.zeros(0), np.zeros(0), decay)
    forms = canonical_forms(config, k_mesh=k)
    field0 = initial_field(config, forms)
    bands = np.stack([f.bands_plus for f in forms])
    v = group_velocity(config, k, bands)[:, first:]
    n0 = np.stack([np.diag(s).real for s in field0.sigma])[:, first:R] - 0.5
    n0 = np.clip(n0, 0.0, None)
    if decay == "exact":
        rate = np.clip(-bands[:, first:].imag, 0.0, None)
    else:
        rate = expansion.Gamma[first:][None, :] * k[:, None] ** 2
    zero = int(np.argmin(np.abs(k)))
    nu = n0[zero]
    return QPInputs(
        R, k, v, rate, n0, expansion.Gamma[first:], nu, expansion.site_velocity[first:], decay
    )


def qp_entropy(inputs: QPInputs, t, L: int | None = None, per_band: bool = False):
    """Quasiparticle entropy at time(s) ``t``; finite ring of ``L`` sites if given."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros((len(ts), inputs.v.shape[1]))
    w = inputs.weights[:, None]
    speed = 2 * np.abs(inputs.v)
    for i, ti in enumerate(ts):
        s = pair_entropy(inputs.densities(ti))
        dist = speed * ti
        if L is not None:
            d = np.mod(dist, L)
            dist = np.minimum(d, L - d)
        out[i] = np.sum(w * dist * s, axis=0) / inputs.R
    total = out.sum(axis=1)
    if np.ndim(t) == 0:
        total, out = total[0], out[0]
    return (total, out) if per_band else total


def check_quadrature(config: ChainConfig, t, L=None, rtol: float = 1e-3, n_uniform: int = 1024):
    """Compare the QP integral on a grid and on its refinement; raise if they differ by > ``rtol``."""
    coarse = qp_entropy(qp_inputs(config, qp_grid(n_uniform)), t, L)
    fine = qp_entropy(qp_inputs(config, qp_grid(2 * n_uniform, 400)), t, L)
    rel = np.max(np.abs(fine - coarse) / np.maximum(np.abs(fine), 1e-300))
    if rel > rtol:
        raise QuadratureError(f"QP integral changes by {rel:.2e} under mesh doubling")
    return float(rel)


def asymptotic_coefficient(
    inputs: QPInputs,
    t0: float = 100.0,
    ratio: float = 4.0,
    levels: int = 8,
    rtol: float = 0.01,
    atol: float = 1e-5,
):
    """``lim S(t)/sqrt(t)`` by Richardson extrapolation along ``t0 * ratio**i``.

    Assumes ``S/sqrt(t) = b + c t^{-1/2} + ...``.  Convergence requires the
    last two extrapolants to agree to ``max(rtol * |b|, atol)``.  Returns ``(b, per_band, g)``
    with ``g_j = b_j sqrt(Gamma_j) / |v_j|`` for bands with ``v_j != 0``.
    """
    if levels < 3:
        raise ValueError("need at least 3 levels to judge convergence")
    nb = inputs.v.shape[1]
    if nb == 0:
        return 0.0, np.zeros(0), np.zeros(0)
    ts = t0 * ratio ** np.arange(levels)
    _, per = qp_entropy(inputs, ts, per_band=True)
    r = per / np.sqrt(ts)[:, None]
    q = np.sqrt(ratio)
    rich = (q * r[1:] - r[:-1]) / (q - 1)
    total = rich.sum(axis=1)
    scale = max(abs(total[-1]), np.abs(rich[-1]).sum(), 1e-300)
    if abs(total[-1] - total[-2]) > max(rtol * scale, atol):
        raise ConvergenceError(
            f"sqrt(t) coefficient not converged: {total[-2]:.5g} vs {total[-1]:.5g}"
        )
    b_j = rich[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(np.abs(inputs.v0) > 1e-9, b_j * np.sqrt(inputs.Gamma) / np.abs(inputs.v0), np.nan)
    return float(total[-1]), b_j, g


def pair_function(nu, u_max: float = 6.0, n: int = 4001) -> float:
    """``(1/pi) int du s(n(nu, u))`` with ``n = nu e^{-4u^2}/(1 + nu(1 - e^{-4u^2}))``.

    The small-``k`` limit of the quasiparticle integral gives
    ``S/sqrt(t) -> (1/R) sum_j |v_j|/sqrt(Gamma_j) * pair_function(nu_j)``,
    so this is an independent evaluation of the measured ``g``.
    """
    u = np.linspace(-u_max, u_max, n)
    dens = density_decay(np.full_like(u, nu), 1.0, u, 1.0)
    return float(np.trapezoid(pair_entropy(dens), u) / np.pi)


@dataclass
class SqrtFit:
    a: float
    b: float
    rmse: float
    alpha: float
    window: tuple
    n_samples: int
    S_range: float

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "rmse": self.rmse,
            "alpha": self.alpha,
            "window": list(self.window),
            "n_samples": self.n_samples,
            "S_range": self.S_range,
            "rmse_over_range": self.rmse / self.S_range if self.S_range > 0 else float("nan"),
        }


def fit_sqrt(times, S, window=None, min_samples: int = 20) -> SqrtFit:
    """Least-squares ``S = a + b sqrt(t)`` in ``window`` and log-log slope of ``S - a``."""
    times = np.asarray(times, dtype=float)
    S = np.asarray(S, dtype=float)
    lo, hi = (times.min(), times.max()) if window is None else window
    sel = (times >= lo) & (times <= hi)
    if sel.sum() < min_samples:
        raise FitWindowError(f"only {int(sel.sum())} samples in window [{lo:g}, {hi:g}]")
    t, s = times[sel], S[sel]
    design = np.c_[np.ones_like(t), np.sqrt(t)]
    (a, b), *_ = np.linalg.lstsq(design, s, rcond=None)
    rmse = float(np.sqrt(np.mean((design @ [a, b] - s) ** 2)))
    shifted = s - a
    ok = (shifted > 0) & (t > 0)
    if ok.sum() >= 2:
        alpha = float(np.polyfit(np.log(t[ok]), np.log(shifted[ok]), 1)[0])
    else:
        alpha = float("nan")
    return SqrtFit(float(a), float(b), rmse, alpha, (float(lo), float(hi)), int(sel.sum()), float(np.ptp(s)))


def loglog_slope(times, S, offset: float, window) -> float:
    """Slope of ``log(S - offset)`` against ``log t`` inside ``window``."""
    times = np.asarray(times, dtype=float)
    S = np.asarray(S, dtype=float)
    sel = (times >= window[0]) & (times <= window[1]) & (S - offset > 0)
    return float(np.polyfit(np.log(times[sel]), np.log(S[sel] - offset), 1)[0])


@dataclass
class Collapse:
    grid: np.ndarray
    curves: np.ndarray
    labels: list
    fits: list
    metric: float
    relative_metric: float


def scaling_collapse(traces, window=None, labels=None, n_grid: int = 200) -> Collapse:
    """Rescale each trace to ``(S - a)/b`` and compare on a common time grid.

    ``traces`` is a sequence of ``(times, S)``.  The metric is the largest
    pairwise RMS distance between rescaled curves; ``relative_metric`` divides
    by the largest RMS norm of a rescaled curve.
    """
    traces = [(np.asarray(t, float), np.asarray(s, float)) for t, s in traces]
    labels = list(labels) if labels is not None else [str(i) for i in range(len(traces))]
    fits = [fit_sqrt(t, s, window) for t, s in traces]
    lo = max(f.window[0] for f in fits)
    hi = min(f.window[1] for f in fits)
    lo = max(lo, max(t.min() for t, _ in traces))
    hi = min(hi, min(t.max() for t, _ in traces))
    grid = np.linspace(lo, hi, n_grid)
    curves = np.array([(np.interp(grid, t, s) - f.a) / f.b for (t, s), f in zip(traces, fits)])
    metric = 0.0
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            metric = max(metric, float(np.sqrt(np.mean((curves[i] - curves[j]) ** 2))))
    norm = max(float(np.sqrt(np.mean(c**2))) for c in curves) if len(curves) else 1.0
    return Collapse(grid, curves, labels, fits, metric, metric / norm if norm > 0 else 0.0)


def peak_time(times, S) -> float:
    """Time of the maximum, refined by a parabola through the three highest samples."""
    times = np.asarray(times, dtype=float)
    S = np.asarray(S, dtype=float)
    i = int(np.argmax(S))
    if 0 < i < len(S) - 1:
        t3, s3 = times[i - 1 : i + 2], S[i - 1 : i + 2]
        c2, c1, _ = np.polyfit(t3, s3, 2)
        if c2 < 0:
            return float(-c1 / (2 * c2))
    return float(times[i])


def max_velocity(config: ChainConfig, n: int = 2048) -> float:
    """Largest site-unit group velocity over all bands."""
    k = -np.pi + 2 * np.pi * (np.arange(n) + 1) / n
    bands = track_bands(config.R, config.mass, config.gamma, k)
    return float(np.abs(group_velocity(config, k, bands)).max())
