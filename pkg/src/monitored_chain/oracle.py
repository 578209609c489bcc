"""Truncated Fock-space ground truth for chains of at most three sites.

Three independent routes to the connected covariance of ``(x, p)``:

* :func:`evolve_sme` integrates the stochastic master equation

  ``d rho = dt(-i[H, rho] - gamma/2 sum_b [O_b, [O_b, rho]]) + sum_b dW_b {O_b - <O_b>, rho}``

  with ``dW_b`` of variance ``gamma dt`` (Ito).  Two schemes are offered:
  ``"euler"`` (Euler-Maruyama, trace-renormalised and Hermitised each step)
  and ``"kraus"`` (normalised Gaussian Kraus steps, see :func:`kraus_step`).
* :func:`evolve_nonhermitian` propagates ``rho`` with ``H - i gamma sum_b O_b^2``.
* :func:`realspace_riccati` integrates the covariance ODE directly.

The Fock-space routes work in a co-moving Gaussian frame.  The physical
quadratures are represented as ``r = S r~ + d``, where ``r~`` are the
truncated quadratures of ``n_max + 1`` levels per site and ``S`` is
symplectic.  Every ``reframe_interval`` the state is rotated by the exact
Gaussian unitary that removes its mean and squeezing with respect to ``r~``
(:func:`reframe`), and ``(S, d)`` are updated accordingly.  Because the frame
change is exact symplectic algebra, truncation only ever acts on the
non-Gaussian remainder of the state, which keeps the top-level occupation
small at modest ``n_max``.  ``reframe_interval=None`` keeps the initial frame
fixed (the plain number basis of the initial product state).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, CutoffLeakError, NonPhysicalStateError
from .model import ChainConfig, build_model, initial_covariance

logger = logging.getLogger(__name__)

MAX_DIM = 10_000


@dataclass(frozen=True)
class FockConfig:
    """Cutoff, frame and noise settings of the dense simulation."""

    chain: ChainConfig
    n_max: int = 10
    dt_sde: float = 1e-3
    seed: int = 0
    leak_tol: float = 1e-6
    reframe_interval: float | None = 0.05

    def __post_init__(self):
        if self.chain.L > 3:
            raise ConfigError("the Fock oracle supports at most 3 sites", "L")
        if self.n_max < 1:
            raise ConfigError("n_max must be at least 1", "n_max")
        if (self.n_max + 1) ** self.chain.L > MAX_DIM:
            raise ConfigError(f"Hilbert dimension exceeds {MAX_DIM}", "n_max")
        if self.dt_sde <= 0:
            raise ConfigError("dt_sde must be positive", "dt_sde")
        if self.reframe_interval is not None and self.reframe_interval <= 0:
            raise ConfigError("reframe_interval must be positive or None", "reframe_interval")

    @property
    def dim(self) -> int:
        return (self.n_max + 1) ** self.chain.L


def _omega(L):
    zero = np.zeros((L, L))
    eye = np.eye(L)
    return np.block([[zero, eye], [-eye, zero]])


def _embed(op, site, L, d):
    mats = [np.eye(d, dtype=complex)] * L
    mats[site] = op
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


@dataclass
class FockSpace:
    """Truncated frame quadratures ``r~ = (x~_1..x~_L, p~_1..p~_L)``."""

    L: int
    n_max: int
    r: list
    n_top: np.ndarray

    @property
    def dim(self) -> int:
        return (self.n_max + 1) ** self.L

    def combination(self, coeffs, const=0.0) -> np.ndarray:
        """``sum_a coeffs_a r~_a + const``."""
        out = const * np.eye(self.dim, dtype=complex)
        for c, op in zip(coeffs, self.r):
            if c != 0:
                out = out + c * op
        return out

    def quadratic(self, G) -> np.ndarray:
        """``1/2 sum_ab G_ab r~_a r~_b`` for symmetric ``G``."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        n = len(self.r)
        for a in range(n):
            for b in range(n):
                if G[a, b] != 0:
                    out += 0.5 * G[a, b] * (self.r[a] @ self.r[b])
        return out


def fock_space(L: int, n_max: int) -> FockSpace:
    a = np.diag(np.sqrt(np.arange(1, n_max + 1)), 1).astype(complex)
    x = (a + a.conj().T) / np.sqrt(2)
    p = (a - a.conj().T) / np.sqrt(2) / 1j
    d = n_max + 1
    xs = [_embed(x, i, L, d) for i in range(L)]
    ps = [_embed(p, i, L, d) for i in range(L)]
    top = np.zeros((d, d))
    top[-1, -1] = 1.0
    n_top = sum(_embed(top, i, L, d) for i in range(L)).real
    return FockSpace(L, n_max, xs + ps, n_top)


@dataclass
class GaussianFrame:
    """Physical quadratures ``r = S r~ + d``."""

    S: np.ndarray
    d: np.ndarray

    @classmethod
    def product(cls, L: int, omega0: float) -> "GaussianFrame":
        """Frame whose vacuum is the product ground state of ``p^2 + omega0^2 x^2``."""
        scale = np.r_[np.full(L, omega0**-0.5), np.full(L, omega0**0.5)]
        return cls(np.diag(scale), np.zeros(2 * L))

    def covariance(self, cov_frame) -> np.ndarray:
        return self.S @ cov_frame @ self.S.T

    def mean(self, mean_frame) -> np.ndarray:
        return self.S @ mean_frame + self.d


@dataclass
class FockOperators:
    """Physical operators expressed in the current frame."""

    H: np.ndarray
    O: list


def fock_operators(space: FockSpace, frame: GaussianFrame, config: ChainConfig) -> FockOperators:
    """Hamiltonian ``x^T V x + p^T p`` and monitored block sums in ``frame``."""
    model = build_model(config)
    L = config.L
    zero = np.zeros((L, L))
    h = 2 * np.block([[model.V, zero], [zero, np.eye(L)]])
    # 1/2 (S r~ + d)^T h (S r~ + d) = 1/2 r~^T S^T h S r~ + d^T h S r~ + const
    G = frame.S.T @ h @ frame.S
    H = space.quadratic((G + G.T) / 2) + space.combination(frame.d @ h @ frame.S)
    O = []
    for b in range(config.n_cells):
        sel = np.zeros(2 * L)
        sel[b * config.R : (b + 1) * config.R] = 1.0
        O.append(space.combination(sel @ frame.S, sel @ frame.d))
    return FockOperators(H, O)


def frame_moments(rho, space: FockSpace):
    """Mean and symmetrised covariance of ``r~`` in ``rho``."""
    n = len(space.r)
    mean = np.array([np.trace(rho @ op).real for op in space.r])
    cov = np.empty((n, n))
    for i in range(n):
        ri = rho @ space.r[i]
        for j in range(i, n):
            val = np.trace(ri @ space.r[j]).real - mean[i] * mean[j]
            cov[i, j] = cov[j, i] = val
    return mean, cov


def connected_covariance(rho, space: FockSpace, frame: GaussianFrame) -> np.ndarray:
    """Connected covariance of the physical ``(x_1..x_L, p_1..p_L)``."""
    _, cov = frame_moments(rho, space)
    return frame.covariance(cov)


def reframe(rho, space: FockSpace, frame: GaussianFrame):
    """Move ``rho`` to the frame in which it has zero mean and covariance ``I/2``.

    With ``T = (2 Gamma~)^{-1/2}`` made exactly symplectic as ``exp(Om G)``,
    ``U_q = exp(-i r~^T G r~ / 2)`` satisfies ``U_q^dag r~ U_q = T r~`` and the
    displacement ``U_d = exp(i e^T r~)`` with ``e = -Om m`` removes the
    remaining mean ``m``.  Returns the rotated state and the updated frame.
    """
    mean, cov = frame_moments(rho, space)
    w, v = np.linalg.eigh(2 * cov)
    if w.min() <= 0:
        raise NonPhysicalStateError("frame covariance is not positive definite")
    T = (v / np.sqrt(w)) @ v.T
    Om = _omega(space.L)
    G = -Om @ sla.logm(T).real
    G = (G + G.T) / 2
    T = sla.expm(Om @ G)
    T_inv = -Om @ T.T @ Om
    m = T @ mean
    U = sla.expm(1j * space.combination(-Om @ m)) @ sla.expm(-1j * space.quadratic(G))
    new = U @ rho @ U.conj().T
    new = (new + new.conj().T) / 2
    new = new / np.trace(new).real
    S = frame.S @ T_inv
    return new, GaussianFrame(S, frame.d + S @ m)


def vacuum(space: FockSpace) -> np.ndarray:
    rho = np.zeros((space.dim, space.dim), dtype=complex)
    rho[0, 0] = 1.0
    return rho


@dataclass
class OracleTrajectory:
    times: np.ndarray
    cov: np.ndarray
    max_leak: float
    scheme: str
    seed: int | None = None
    means: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def _check(rho, space, leak_tol):
    leak = float(np.trace(rho @ space.n_top).real)
    if leak > leak_tol:
        raise CutoffLeakError(f"top Fock level occupation {leak:.2e} exceeds {leak_tol:g}")
    return leak


def _positivity(rho, tol=1e-6):
    w = np.linalg.eigvalsh(rho)
    if w.min() < -tol:
        raise NonPhysicalStateError(f"density matrix eigenvalue {w.min():.2e}")


def _kick_factors(ops: FockOperators):
    """Eigen-decompositions of the block sums used by :func:`kraus_step`."""
    out = []
    for o in ops.O:
        vals, vecs = np.linalg.eigh(o)
        out.append((vecs, vals))
    return out


def kraus_step(rho, quad, kicks, dY):
    """One normalised Gaussian Kraus step.

    The Ito SME step is generated by ``K = 1 - i H dt - gamma/2 O^2 dt + O dY``
    with ``dY = dW + 2 gamma <O> dt`` and ``dY^2 = gamma dt``.  Written as an
    exponential with the Ito rule this is ``exp(quad) exp(O dY)`` with
    ``quad = -i H dt - gamma/2 O^2 dt - gamma/2 O^2 dt``; the second
    ``gamma/2`` is the Ito correction of ``exp(O dY)``.  Because ``quad`` is
    quadratic and ``O dY`` linear in the canonical operators, the split only
    affects first moments, so connected covariances carry no time-step error.
    ``kicks`` holds ``(eigenvectors, eigenvalues)`` of each ``O_b``.
    """
    K = quad
    for (vecs, vals), y in zip(kicks, dY):
        K = K @ ((vecs * np.exp(vals * y)) @ vecs.conj().T)
    new = K @ rho @ K.conj().T
    new = (new + new.conj().T) / 2
    return new / np.trace(new).real


def _reframe_every(fc: FockConfig, dt: float) -> int | None:
    if fc.reframe_interval is None:
        return None
    return max(1, int(round(fc.reframe_interval / dt)))


def evolve_sme(
    fc: FockConfig,
    times,
    scheme: str = "kraus",
    rng: np.random.Generator | None = None,
    check_every: int = 50,
    positivity_tol: float = 1e-6,
) -> OracleTrajectory:
    """One measurement trajectory; returns connected covariances at ``times``.

    The Euler-Maruyama scheme does not preserve positivity: ``rho`` acquires
    negative eigenvalues of order ``dt``.  Raise ``positivity_tol`` to run it
    at all; the Kraus scheme is positive by construction.
    """
    if scheme not in ("kraus", "euler"):
        raise ValueError("scheme must be 'kraus' or 'euler'")
    cfg = fc.chain
    space = fock_space(cfg.L, fc.n_max)
    frame = GaussianFrame.product(cfg.L, cfg.omega0)
    rng = np.random.default_rng(fc.seed) if rng is None else rng
    rho = vacuum(space)
    times = np.asarray(times, dtype=float)
    gamma, dt = cfg.gamma, fc.dt_sde
    every = _reframe_every(fc, dt)
    eye = np.eye(space.dim)

    def prepare(frame):
        ops = fock_operators(space, frame, cfg)
        if scheme == "euler":
            return ops, None, None
        O2 = sum(o @ o for o in ops.O)
        quad = sla.expm(-1j * ops.H * dt - gamma * dt * O2)
        return ops, quad, _kick_factors(ops)

    ops, quad, kicks = prepare(frame)
    out = np.empty((len(times), 2 * cfg.L, 2 * cfg.L))
    means = np.empty((len(times), cfg.n_cells))
    t = 0.0
    max_leak = 0.0
    step = 0
    for i, target in enumerate(times):
        n = int(round((target - t) / dt))
        for _ in range(n):
            expect = np.array([np.trace(rho @ o).real for o in ops.O])
            dW = rng.normal(0.0, np.sqrt(gamma * dt), size=len(ops.O))
            if scheme == "kraus":
                rho = kraus_step(rho, quad, kicks, dW + 2 * gamma * expect * dt)
            else:
                drho = -1j * (ops.H @ rho - rho @ ops.H) * dt
                for b, o in enumerate(ops.O):
                    oc = o @ rho - rho @ o
                    drho -= 0.5 * gamma * (o @ oc - oc @ o) * dt
                    Mb = o - expect[b] * eye
                    drho += dW[b] * (Mb @ rho + rho @ Mb)
                rho = rho + drho
                rho = (rho + rho.conj().T) / 2
                rho = rho / np.trace(rho).real
            step += 1
            if step % check_every == 0:
                max_leak = max(max_leak, _check(rho, space, fc.leak_tol))
            if every is not None and step % every == 0:
                rho, frame = reframe(rho, space, frame)
                ops, quad, kicks = prepare(frame)
        t += n * dt
        max_leak = max(max_leak, _check(rho, space, fc.leak_tol))
        _positivity(rho, positivity_tol)
        out[i] = connected_covariance(rho, space, frame)
        means[i] = [np.trace(rho @ o).real for o in ops.O]
    return OracleTrajectory(times, out, max_leak, scheme, fc.seed, means)


def evolve_nonhermitian(fc: FockConfig, times) -> OracleTrajectory:
    """``rho(t) = e^{-i H_eff t} rho(0) e^{i H_eff^dagger t} / tr`` with ``H_eff = H - i gamma sum_b O_b^2``.

    Propagated in steps of at most ``reframe_interval`` with a frame update
    after each step.
    """
    cfg = fc.chain
    space = fock_space(cfg.L, fc.n_max)
    frame = GaussianFrame.product(cfg.L, cfg.omega0)
    rho = vacuum(space)
    times = np.asarray(times, dtype=float)
    out = np.empty((len(times), 2 * cfg.L, 2 * cfg.L))
    max_leak = 0.0
    t = 0.0
    for i, target in enumerate(times):
        span = target - t
        if fc.reframe_interval is None:
            n = 1 if span > 0 else 0
        else:
            n = int(np.ceil(span / fc.reframe_interval - 1e-9)) if span > 0 else 0
        for _ in range(n):
            ops = fock_operators(space, frame, cfg)
            H_eff = ops.H - 1j * cfg.gamma * sum(o @ o for o in ops.O)
            U = sla.expm(-1j * H_eff * (span / n))
            rho = U @ rho @ U.conj().T
            rho = (rho + rho.conj().T) / 2
            rho = rho / np.trace(rho).real
            max_leak = max(max_leak, _check(rho, space, fc.leak_tol))
            if fc.reframe_interval is not None:
                rho, frame = reframe(rho, space, frame)
        t = target
        _positivity(rho)
        out[i] = connected_covariance(rho, space, frame)
    return OracleTrajectory(times, out, max_leak, "nonhermitian")


def realspace_riccati(config: ChainConfig, times, dt: float = 1e-3) -> np.ndarray:
    """Covariance ODE in real space, RK4.

    ``dG/dt = Om h G + G h Om^T - 2 G k G + Om k Om^T / 2`` with
    ``h = 2 diag(V, 1)``, ``k = 2 gamma diag(M, 0)`` and ``Om = [[0, 1], [-1, 0]]``.
    """
    model = build_model(config)
    L = config.L
    zero = np.zeros((L, L))
    eye = np.eye(L)
    Om = np.block([[zero, eye], [-eye, zero]])
    h = 2 * np.block([[model.V, zero], [zero, eye]])
    kap = 2 * config.gamma * np.block([[model.M, zero], [zero, zero]])
    A = Om @ h
    src = 0.5 * Om @ kap @ Om.T

    def rhs(G):
        return A @ G + G @ A.T - 2 * G @ kap @ G + src

    G = initial_covariance(config)
    times = np.asarray(times, dtype=float)
    out = np.empty((len(times), 2 * L, 2 * L))
    t = 0.0
    for i, target in enumerate(times):
        n = max(0, int(np.ceil((target - t) / dt - 1e-9)))
        h_step = (target - t) / n if n else 0.0
        for _ in range(n):
            k1 = rhs(G)
            k2 = rhs(G + 0.5 * h_step * k1)
            k3 = rhs(G + 0.5 * h_step * k2)
            k4 = rhs(G + h_step * k3)
            G = G + h_step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            G = (G + G.T) / 2
        t = target
        out[i] = G
    return out


def bloch_riccati_covariance(config: ChainConfig, times) -> np.ndarray:
    """Full-chain covariance from the per-wavevector Riccati integration."""
    from .dynamics import evolve
    from .entropy import assemble_from_psi

    traj, forms = evolve(config, times=times)
    W = np.stack([f.W for f in forms])
    out = []
    for i in range(len(traj)):
        sigma_psi = W @ traj.sigma[i] @ np.swapaxes(W.conj(), -1, -2)
        out.append(assemble_from_psi(sigma_psi, config.n_cells).gamma_A)
    return np.array(out)


@dataclass
class OracleReport:
    times: np.ndarray
    deviations: dict
    tolerance: float
    max_leak: float
    runtime: float

    @property
    def passed(self) -> bool:
        return all(v <= self.tolerance for v in self.deviations.values())

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tolerance": self.tolerance,
            "deviations": self.deviations,
            "max_leak": self.max_leak,
            "runtime_s": self.runtime,
            "t_max": float(self.times.max()),
        }


def three_way_check(fc: FockConfig, times, tolerance: float = 1e-5) -> OracleReport:
    """Compare SME (Kraus), non-Hermitian and Riccati covariances pairwise."""
    import time

    start = time.perf_counter()
    sme = evolve_sme(fc, times, scheme="kraus")
    nh = evolve_nonhermitian(fc, times)
    ric = bloch_riccati_covariance(fc.chain, times)
    dev = {
        "sme_vs_nonhermitian": float(np.abs(sme.cov - nh.cov).max()),
        "sme_vs_riccati": float(np.abs(sme.cov - ric).max()),
        "nonhermitian_vs_riccati": float(np.abs(nh.cov - ric).max()),
    }
    return OracleReport(
        np.asarray(times), dev, tolerance, max(sme.max_leak, nh.max_leak), time.perf_counter() - start
    )
