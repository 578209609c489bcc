"""Per-wavevector algebra of the effective Hamiltonian.

For a block wavevector ``k`` the pair of momenta ``(k, -k)`` is described by
the spinor ``Psi(k) = (a_k^dagger, a_{-k})`` with ``R`` components each, where
``a_{k,j} = n_cells**-0.5 * sum_b exp(-i k b) a_{b,j}``.  On this pair the
effective Hamiltonian acts as ``Psi^dagger H(k) Psi`` with

.. math::

    H(k) = \\begin{pmatrix} K(k) + 1 & K(k) - 1 \\\\ K(k) - 1 & K(k) + 1
    \\end{pmatrix}, \\qquad K(k) = V(k) - i\\gamma J_R,

``V(k)`` the Bloch matrix of the ring Laplacian plus mass and ``J_R`` the
all-ones matrix.  ``C = diag(I, -I)`` encodes the commutators and ``C H`` is
the classical generator: its eigenvalues are ``E_j(k)`` (real part > 0) and
``-E_j(-k)`` (real part < 0).

A canonical transformation ``Psi = W Phi`` with ``W C W^dagger = C`` brings
``H`` to the upper-triangular ``Z = W^dagger H W`` whose diagonal is
``[E_0(k) .. E_{R-1}(k), E_0(-k) .. E_{R-1}(-k)]``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg.lapack import ztrexc
from scipy.optimize import linear_sum_assignment

from .errors import BandSortingError, CanonicalFormError, PoorFitError
from .model import ChainConfig, RealSpaceModel

logger = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-8
TRACK_STEP = 0.01
ZERO_K_SNAP = 1e-12


def signature(R: int) -> np.ndarray:
    return np.diag(np.r_[np.ones(R), -np.ones(R)])


def _hop(R, k):
    """Intra- and inter-cell hopping ``T(k)`` so that ``V = (2+m^2) - T - T^dagger``."""
    k = np.asarray(k, dtype=float)
    T = np.zeros(k.shape + (R, R), dtype=complex)
    for j in range(R - 1):
        T[..., j, j + 1] = 1.0
    T[..., R - 1, 0] += np.exp(-1j * k)
    return T


def bloch_couplings(R: int, mass: float, gamma: float, k) -> np.ndarray:
    """``K(k) = V(k) - i gamma J_R``; broadcasts over an array of ``k``."""
    T = _hop(R, k)
    V = (2.0 + mass**2) * np.eye(R) - T - np.swapaxes(T.conj(), -1, -2)
    return V - 1j * gamma * np.ones((R, R))


def bloch_hamiltonian(R: int, mass: float, gamma: float, k) -> np.ndarray:
    K = bloch_couplings(R, mass, gamma, k)
    eye = np.eye(R)
    top = np.concatenate([K + eye, K - eye], axis=-1)
    bottom = np.concatenate([K - eye, K + eye], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def bloch_hamiltonian_dk(R: int, k) -> np.ndarray:
    """Derivative ``dH/dk`` (the measurement part is ``k``-independent)."""
    k = np.asarray(k, dtype=float)
    dT = np.zeros(k.shape + (R, R), dtype=complex)
    dT[..., R - 1, 0] = -1j * np.exp(-1j * k)
    dV = -dT - np.swapaxes(dT.conj(), -1, -2)
    top = np.concatenate([dV, dV], axis=-1)
    return np.concatenate([top, top], axis=-2)


def hermitian_parts(H):
    """Split ``H = X - i Y`` with ``X``, ``Y`` Hermitian."""
    Hd = np.swapaxes(H.conj(), -1, -2)
    return (H + Hd) / 2, (Hd - H) / 2j


def free_band_energies(R: int, mass: float, k) -> np.ndarray:
    """Unmeasured bands unfolded from the site dispersion, shape ``(..., R)``.

    Band ``j`` carries site momentum ``q = (k + 2 pi j) / R``.
    """
    k = np.asarray(k, dtype=float)[..., None]
    q = (k + 2 * np.pi * np.arange(R)) / R
    return 2 * np.sqrt(4 * np.sin(q / 2) ** 2 + mass**2)


def free_site_velocity(R: int, mass: float) -> np.ndarray:
    """``d omega / d q`` of the unmeasured chain at ``q = 2 pi j / R``."""
    q = 2 * np.pi * np.arange(R) / R
    return 2 * np.sin(q) / np.sqrt(4 * np.sin(q / 2) ** 2 + mass**2)


def closed_form_k0(R: int, mass: float, gamma: float) -> np.ndarray:
    """``E_j(0) = 2 sqrt(4 sin^2(pi j / R) + m^2 - i gamma R delta_{j0})``."""
    j = np.arange(R)
    inner = 4 * np.sin(np.pi * j / R) ** 2 + mass**2 - 1j * gamma * R * (j == 0)
    return 2 * np.sqrt(inner.astype(complex))


@dataclass(frozen=True)
class BlochBlock:
    k: float
    H: np.ndarray
    R: int
    mass: float
    gamma: float

    @property
    def C(self) -> np.ndarray:
        return signature(self.R)

    @property
    def X(self) -> np.ndarray:
        return hermitian_parts(self.H)[0]

    @property
    def Y(self) -> np.ndarray:
        return hermitian_parts(self.H)[1]

    @property
    def generator(self) -> np.ndarray:
        """Classical generator ``C H``: ``d Psi / dt = i C H Psi``."""
        return self.C @ self.H


def bloch_block(model: RealSpaceModel | ChainConfig, k: float) -> BlochBlock:
    config = model.config if isinstance(model, RealSpaceModel) else model
    H = bloch_hamiltonian(config.R, config.mass, config.gamma, k)
    return BlochBlock(float(k), H, config.R, config.mass, config.gamma)


def _top_eigenvalues(R, mass, gamma, ks):
    A = signature(R) @ bloch_hamiltonian(R, mass, gamma, ks)
    ev = np.linalg.eigvals(A)
    order = np.argsort(-ev.real, axis=-1)
    ev = np.take_along_axis(ev, order, axis=-1)
    if np.any(ev[..., R - 1].real <= 0) or np.any(ev[..., R].real >= 0):
        raise BandSortingError("generator does not split into R positive / R negative modes")
    return ev[..., :R]


def _assign(pred, cand, scale, strict=True):
    cost = np.abs(pred[:, None] - cand[None, :])
    rows, cols = linear_sum_assignment(cost)
    if not strict:
        return cols
    base = cost[rows, cols]
    # ambiguous if swapping two distinct eigenvalues costs (almost) nothing
    n = len(pred)
    for a in range(n):
        for b in range(a + 1, n):
            if abs(cand[cols[a]] - cand[cols[b]]) < DEGENERACY_TOL * max(1.0, scale):
                continue
            swapped = cost[a, cols[b]] + cost[b, cols[a]]
            gap = swapped - base[a] - base[b]
            separation = abs(cand[cols[a]] - cand[cols[b]])
            if gap < 0.1 * separation and gap < 1e-3 * scale:
                raise BandSortingError(
                    f"bands {a} and {b} cannot be told apart by continuity"
                )
    return cols


def track_bands(
    R: int, mass: float, gamma: float, ks, step: float = TRACK_STEP, strict: bool = True
):
    """Label the ``R`` positive-frequency bands ``E_j(k)`` by continuity from ``k = 0``.

    Labels at ``k = 0`` come from :func:`closed_form_k0`; the first step off a
    degenerate point uses the slopes of the unmeasured bands, later steps a
    linear extrapolation.  Returns an array of shape ``(len(ks), R)``.

    Continuation through an exceptional point (two bands coalescing, as near
    the zone boundary at weak monitoring) has no unique answer.  With
    ``strict`` such a step raises :class:`BandSortingError`; otherwise the
    closest assignment to the prediction is kept and a warning is logged.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=float))
    out = np.empty(ks.shape + (R,), dtype=complex)
    ref0 = closed_form_k0(R, mass, gamma)
    for sign in (1.0, -1.0):
        sel = (ks >= 0) if sign > 0 else (ks < 0)
        if not np.any(sel):
            continue
        targets = np.abs(ks[sel])
        # round-off-sized |k| (e.g. 4e-16 from linspace) sits on the k = 0
        # degeneracy, where eigensolver noise is far larger than |k| itself
        targets = np.where(targets < ZERO_K_SNAP, 0.0, targets)
        kmax = targets.max()
        grid = np.arange(0.0, kmax + step, step)
        # keep grid points away from targets: tiny steps spoil the extrapolation
        near = np.abs(grid[:, None] - targets[None, :]).min(axis=1) < step / 4
        grid = grid[(grid < kmax) & ~near]
        path = np.unique(np.concatenate([grid, targets, [0.0]]))
        ev = _top_eigenvalues(R, mass, gamma, sign * path)
        free = free_band_energies(R, mass, sign * path)
        scale = float(np.abs(ev).max())
        labelled = np.empty_like(ev)
        cols = _assign(ref0, ev[0], scale) if not _has_degeneracy(ref0) else None
        if cols is None:
            # degenerate labels at k=0 are interchangeable: match values only
            cost = np.abs(ref0[:, None] - ev[0][None, :])
            cols = linear_sum_assignment(cost)[1]
        labelled[0] = ev[0][cols]
        # slopes are taken across at least min_span so that closely spaced
        # path points do not amplify round-off in the extrapolation
        min_span = step * 1e-3
        ambiguous = 0
        for n in range(1, len(path)):
            if n == 1:
                pred = labelled[0] + (free[1] - free[0])
            else:
                m = int(np.searchsorted(path, path[n - 1] - min_span, side="right")) - 1
                m = min(max(m, 0), n - 2)
                slope = (labelled[n - 1] - labelled[m]) / (path[n - 1] - path[m])
                pred = labelled[n - 1] + (path[n] - path[n - 1]) * slope
            try:
                cols = _assign(pred, ev[n], scale)
            except BandSortingError:
                if strict:
                    raise
                cols = _assign(pred, ev[n], scale, strict=False)
                ambiguous += 1
            labelled[n] = ev[n][cols]
        if ambiguous:
            logger.warning(
                "band labels ambiguous at %d of %d points with k %s 0 (exceptional point); "
                "kept the closest continuation",
                ambiguous,
                len(path),
                ">=" if sign > 0 else "<",
            )
        values = labelled[np.searchsorted(path, targets)]
        out[sel] = values
    return out


def _has_degeneracy(values, tol=DEGENERACY_TOL):
    d = np.abs(values[:, None] - values[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return bool(np.any(d < tol * max(1.0, np.abs(values).max())))


@dataclass(frozen=True)
class CanonicalForm:
    """``Psi = W Phi`` with ``W C W^dagger = C`` and upper-triangular ``Z``."""

    k: float
    W: np.ndarray
    Z: np.ndarray
    method: str

    @property
    def R(self) -> int:
        return self.W.shape[0] // 2

    @property
    def C(self) -> np.ndarray:
        return signature(self.R)

    @property
    def W_inv(self) -> np.ndarray:
        C = self.C
        return C @ self.W.conj().T @ C

    @property
    def X(self) -> np.ndarray:
        return hermitian_parts(self.Z)[0]

    @property
    def Y(self) -> np.ndarray:
        return hermitian_parts(self.Z)[1]

    @property
    def bands(self) -> np.ndarray:
        return np.diag(self.Z).copy()

    @property
    def bands_plus(self) -> np.ndarray:
        return np.diag(self.Z)[: self.R].copy()

    @property
    def bands_minus(self) -> np.ndarray:
        return np.diag(self.Z)[self.R :].copy()

    def canonical_residual(self) -> float:
        C = self.C
        return float(np.abs(self.W @ C @ self.W.conj().T - C).max())

    def lower_residual(self) -> float:
        return float(np.abs(np.tril(self.Z, -1)).max(initial=0.0))


def _c_gram_schmidt(U, C):
    signs = np.diag(C).real
    W = np.zeros_like(U, dtype=complex)
    for i in range(U.shape[1]):
        w = U[:, i].astype(complex)
        for _ in range(2):
            for j in range(i):
                w = w - W[:, j] * (W[:, j].conj() @ (signs * w)) * signs[j]
        norm = float(np.real(w.conj() @ (signs * w)))
        if np.sign(norm) != signs[i] or abs(norm) < 1e-14 * np.linalg.norm(w) ** 2:
            raise CanonicalFormError(
                f"column {i} has C-norm {norm:.3e}; expected sign {signs[i]:+.0f}"
            )
        W[:, i] = w / np.sqrt(abs(norm))
    return W


def _ordered_schur(A, targets):
    T, U = sla.schur(A, output="complex")
    for p in range(len(targets)):
        d = np.diag(T)
        i = p + int(np.argmin(np.abs(d[p:] - targets[p])))
        if i != p:
            T, U, info = ztrexc(T, U, i + 1, p + 1)
            if info != 0:
                raise CanonicalFormError(f"Schur reordering failed (info={info})")
    return U


def triangularize(block: BlochBlock, targets=None, slopes=None) -> CanonicalForm:
    """Canonical upper-triangular form of one Bloch block.

    Parameters
    ----------
    block : BlochBlock
    targets : array, optional
        Desired diagonal of ``C Z`` (band-labelled eigenvalues of ``C H``:
        ``E_j(k)`` then ``-E_j(-k)``).  Computed by continuity when omitted.
    slopes : array, optional
        ``d target / dk`` on the side the labels were continued from.  Inside
        an exactly degenerate eigenspace the basis is then fixed by
        degenerate perturbation theory; without slopes the ordered Schur
        route is taken there.
    """
    R, C = block.R, block.C
    A = C @ block.H
    if targets is None:
        bands = track_bands(R, block.mass, block.gamma, [block.k, -block.k], strict=False)
        targets = np.r_[bands[0], -bands[1]]
    targets = np.asarray(targets, dtype=complex)
    w, V = np.linalg.eig(A)
    scale = max(1.0, float(np.abs(w).max()))
    cost = np.abs(targets[:, None] - w[None, :])
    cols = linear_sum_assignment(cost)[1]
    if cost[np.arange(len(targets)), cols].max() > 1e-6 * scale:
        raise BandSortingError("eigenvalues of C H do not match the band targets")
    w, V = w[cols], V[:, cols]
    method = "eigen"
    degenerate = _has_degeneracy(w)
    if degenerate and slopes is not None and np.linalg.cond(V) < 1e10:
        V = _split_degenerate(w, V, C @ bloch_hamiltonian_dk(R, block.k), slopes, scale)
    elif degenerate or np.linalg.cond(V) > 1e10:
        logger.debug("k=%g: degenerate or defective generator, using ordered Schur", block.k)
        V = _ordered_schur(A, targets)
        method = "schur"
    W = _c_gram_schmidt(V, C)
    Z = W.conj().T @ block.H @ W
    form = CanonicalForm(block.k, W, Z, method)
    if form.lower_residual() > 1e-8 * scale:
        raise CanonicalFormError(
            f"k={block.k:g}: Z not upper triangular (residual {form.lower_residual():.2e})"
        )
    return form


def _split_degenerate(w, V, dA, slopes, scale):
    """Rotate each degenerate cluster onto the eigenvectors of the projected ``dA``."""
    V = V.copy()
    Vinv = np.linalg.inv(V)
    done = np.zeros(len(w), dtype=bool)
    for i in range(len(w)):
        if done[i]:
            continue
        cluster = np.flatnonzero(np.abs(w - w[i]) < DEGENERACY_TOL * scale)
        done[cluster] = True
        if len(cluster) == 1:
            continue
        mu, S = np.linalg.eig(Vinv[cluster] @ dA @ V[:, cluster])
        order = linear_sum_assignment(np.abs(np.asarray(slopes)[cluster][:, None] - mu[None, :]))[1]
        V[:, cluster] = V[:, cluster] @ S[:, order]
    return V


def target_slopes_k0(config: ChainConfig) -> np.ndarray:
    """Slopes of ``[E_j(k), -E_j(-k)]`` at ``k = 0+``; gapless bands move like the free chain."""
    v = free_site_velocity(config.R, config.mass) / config.R
    v[0] = 0.0  # the gapped band is never degenerate with another at k = 0
    return np.r_[v, v]


@dataclass(frozen=True)
class BandStructure:
    """Band-labelled ``E_j(k)`` on a mesh; band 0 is the gapped band."""

    k: np.ndarray
    E: np.ndarray
    R: int
    gamma: float

    @property
    def gapped_index(self) -> int:
        return 0

    def gapless(self) -> np.ndarray:
        return self.E[:, 1:]


def bandstructure(model: RealSpaceModel | ChainConfig, k_mesh=None) -> BandStructure:
    config = model.config if isinstance(model, RealSpaceModel) else model
    ks = config.k_mesh if k_mesh is None else np.asarray(k_mesh, dtype=float)
    E = track_bands(config.R, config.mass, config.gamma, ks, strict=False)
    if config.gamma > 0:
        at0 = closed_form_k0(config.R, config.mass, config.gamma)
        flagged = np.abs(at0.imag) > config.gamma / 2 * min(1.0, config.R / max(config.mass, 1e-12))
        if flagged.sum() != 1 or not flagged[0]:
            logger.warning("gapped band not uniquely identified by |Im E(0)| threshold")
    return BandStructure(ks, E, config.R, config.gamma)


def canonical_forms(config: ChainConfig, k_mesh=None) -> list[CanonicalForm]:
    """Triangularise every mesh point; returns a list in mesh order.

    At ``k = 0`` the pairs ``j``, ``R - j`` are degenerate; their basis is the
    ``k -> 0+`` limit of the labelled bands.
    """
    ks = config.k_mesh if k_mesh is None else np.asarray(k_mesh, dtype=float)
    R = config.R
    # labels only order the diagonal of Z here; any consistent choice is valid
    bands = track_bands(R, config.mass, config.gamma, np.r_[ks, -ks], strict=False)
    plus, minus = bands[: len(ks)], bands[len(ks) :]
    forms = []
    for n, k in enumerate(ks):
        block = bloch_block(config, k)
        targets = np.r_[plus[n], -minus[n]]
        slopes = target_slopes_k0(config) if k == 0 else None
        forms.append(triangularize(block, targets, slopes))
    return forms


@dataclass(frozen=True)
class BandExpansion:
    """Small-``k`` coefficients ``E_j(k) = E_j + v_j k + delta_j k^2 / 2 - i Gamma_j k^2``.

    ``E0`` keeps the complex ``k = 0`` energy of every band (band 0 gapped).
    ``v`` is per unit block wavevector; multiply by ``R`` for sites per time.
    """

    E0: np.ndarray
    E: np.ndarray
    v: np.ndarray
    delta: np.ndarray
    Gamma: np.ndarray
    residual: np.ndarray
    R: int

    @property
    def site_velocity(self) -> np.ndarray:
        return self.R * self.v

    def to_dict(self) -> dict:
        return {
            "R": self.R,
            "E0_gapped": [float(self.E0[0].real), float(self.E0[0].imag)],
            "bands": [
                {
                    "j": j,
                    "E": float(self.E[j]),
                    "v": float(self.v[j]),
                    "delta": float(self.delta[j]),
                    "Gamma": float(self.Gamma[j]),
                    "fit_residual": float(self.residual[j]),
                }
                for j in range(self.R)
            ],
        }


def expand_band(k, E, degree: int = 3, rtol: float = 1e-6):
    """Least-squares polynomial fit of one band sampled around ``k = 0``.

    Returns ``(E_0, v, delta, Gamma, residual)``; raises :class:`PoorFitError`
    when the rms residual exceeds ``rtol * |E_0|``.
    """
    k = np.asarray(k, dtype=float)
    E = np.asarray(E, dtype=complex)
    if k.size < 5 or k.size <= degree:
        raise PoorFitError("need at least 5 stencil points")
    vander = np.vander(k, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(vander, E, rcond=None)
    residual = float(np.sqrt(np.mean(np.abs(vander @ coef - E) ** 2)))
    if residual > rtol * max(abs(coef[0]), 1e-300):
        raise PoorFitError(f"fit residual {residual:.2e} exceeds {rtol:g} |E_0|")
    return coef[0], coef[1].real, 2 * coef[2].real, -coef[2].imag, residual


def band_expansion(config: ChainConfig, half_width: float = 0.02, points: int = 9):
    ks = np.linspace(-half_width, half_width, points)
    curves = track_bands(config.R, config.mass, config.gamma, ks, step=half_width / points)
    fits = [expand_band(ks, curves[:, j]) for j in range(config.R)]
    E0, v, delta, Gamma, res = (np.array(x) for x in zip(*fits))
    return BandExpansion(E0, E0.real, v, delta, Gamma, res, config.R)


def curvature_richardson(config: ChainConfig, h: float = 0.02):
    """Independent estimate of ``Gamma_j`` and ``v_j`` by Richardson-extrapolated differences."""
    ks = np.array([-h, -h / 2, 0.0, h / 2, h])
    E = track_bands(config.R, config.mass, config.gamma, ks, step=h / 8)
    d2 = lambda s, idx: (E[idx[0]] - 2 * E[2] + E[idx[1]]) / s**2
    d1 = lambda s, idx: (E[idx[1]] - E[idx[0]]) / (2 * s)
    second = (4 * d2(h / 2, (1, 3)) - d2(h, (0, 4))) / 3
    first = (4 * d1(h / 2, (1, 3)) - d1(h, (0, 4))) / 3
    return first.real, -second.imag / 2


def group_velocity(config: ChainConfig, ks, bands=None) -> np.ndarray:
    """Site-unit velocity ``R * Re dE_j/dk`` from first-order eigenvalue perturbation."""
    ks = np.atleast_1d(np.asarray(ks, dtype=float))
    R = config.R
    if bands is None:
        bands = track_bands(R, config.mass, config.gamma, ks)
    C = signature(R)
    out = np.empty(bands.shape)
    for n, k in enumerate(ks):
        A = C @ bloch_hamiltonian(R, config.mass, config.gamma, k)
        dA = C @ bloch_hamiltonian_dk(R, k)
        w, left, right = sla.eig(A, left=True, right=True)
        for j in range(R):
            i = int(np.argmin(np.abs(w - bands[n, j])))
            l, r = left[:, i], right[:, i]
            denom = l.conj() @ r
            if abs(denom) < 1e-12:
                warnings.warn(f"near-defective band {j} at k={k:g}; velocity unreliable")
            out[n, j] = R * ((l.conj() @ dA @ r) / denom).real
    return out
