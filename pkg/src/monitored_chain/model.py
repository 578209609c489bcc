"""Real-space model of the monitored harmonic chain.

The chain has ``L`` sites on a ring with Hamiltonian

.. math::

    \\hat H = \\sum_{ij} V_{ij} \\hat x_i \\hat x_j + \\sum_i \\hat p_i^2,
    \\qquad V = -\\nabla^2 + m^2,

and the positions are monitored through block sums
``O_b = x_{bR} + ... + x_{bR+R-1}``.  The measurement matrix ``M`` is the
block-diagonal all-ones matrix of those blocks.  Sites are ordered by
``(block b, sublattice j)``, i.e. site ``i = b*R + j``.
"""

from __future__ import annotations

import configparser
import json
import logging
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import ConfigError

logger = logging.getLogger(__name__)

#: keys accepted in a config file, with their types
CONFIG_KEYS = {
    "L": int,
    "R": int,
    "m": float,
    "gamma": float,
    "omega0": float,
    "t_max": float,
    "dt_out": float,
    "seed": int,
    "regularize_zero_mass": bool,
    "zero_mass_epsilon": float,
}


@dataclass(frozen=True)
class ChainConfig:
    """Physical and numerical parameters of one simulation.

    ``omega0`` defaults to ``m + 1`` so that the product initial state is
    excited in every band.
    """

    L: int
    R: int
    m: float = 1.0
    gamma: float = 0.5
    omega0: float | None = None
    t_max: float = 10.0
    dt_out: float = 0.5
    seed: int = 0
    regularize_zero_mass: bool = False
    zero_mass_epsilon: float = 1e-8
    boundary: str = field(default="periodic", init=False)

    def __post_init__(self):
        if not isinstance(self.L, (int, np.integer)) or self.L <= 0:
            raise ConfigError(f"L must be a positive integer, got {self.L!r}", "L")
        if not isinstance(self.R, (int, np.integer)) or self.R <= 0:
            raise ConfigError(f"R must be a positive integer, got {self.R!r}", "R")
        if self.L % self.R:
            raise ConfigError(f"R={self.R} does not divide L={self.L}", "R")
        if not self.gamma >= 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma!r}", "gamma")
        if not self.m >= 0:
            raise ConfigError(f"m must be >= 0, got {self.m!r}", "m")
        if self.m == 0 and not self.regularize_zero_mass:
            raise ConfigError(
                "m = 0 leaves a free zero mode; pass regularize_zero_mass=True "
                "to replace m by zero_mass_epsilon",
                "m",
            )
        if self.omega0 is None:
            object.__setattr__(self, "omega0", self.mass + 1.0)
        if not self.omega0 > 0:
            raise ConfigError(f"omega0 must be > 0, got {self.omega0!r}", "omega0")
        if not (self.t_max >= 0 and self.dt_out > 0):
            raise ConfigError("need t_max >= 0 and dt_out > 0", "dt_out")

    @property
    def mass(self) -> float:
        """Mass actually used in the couplings (``m`` or the regulator)."""
        if self.m == 0:
            return self.zero_mass_epsilon
        return float(self.m)

    @property
    def n_cells(self) -> int:
        return self.L // self.R

    @property
    def k_mesh(self) -> np.ndarray:
        return k_mesh(self.n_cells)

    @property
    def t_grid(self) -> np.ndarray:
        n = int(math.floor(self.t_max / self.dt_out + 1e-9))
        return self.dt_out * np.arange(n + 1)

    def replace(self, **changes) -> "ChainConfig":
        data = {k: v for k, v in asdict(self).items() if k != "boundary"}
        if "m" in changes and "omega0" not in changes:
            data["omega0"] = None
        data.update(changes)
        return ChainConfig(**data)

    def to_dict(self) -> dict:
        return asdict(self)


def k_mesh(n_cells: int) -> np.ndarray:
    """Block wavevectors ``2 pi n / n_cells`` folded into ``(-pi, pi]``.

    Points are returned in FFT order (``n = 0, 1, ..., n_cells - 1``).
    """
    k = 2 * np.pi * np.arange(n_cells) / n_cells
    return np.where(k > np.pi + 1e-12, k - 2 * np.pi, k)


def load_config(path: str | Path) -> ChainConfig:
    """Read a ``key = value`` config file (``#`` starts a comment)."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[chain]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_mapping(dict(parser["chain"]))


def config_from_mapping(raw: dict) -> ChainConfig:
    values = {}
    for key, text in raw.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}", key)
        kind = CONFIG_KEYS[key]
        try:
            if kind is bool:
                values[key] = str(text).strip().lower() in ("1", "true", "yes", "on")
            elif kind is int:
                as_float = float(text)
                if as_float != int(as_float):
                    raise ValueError
                values[key] = int(as_float)
            else:
                values[key] = float(text)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {text!r}", key) from None
    for required in ("L", "R"):
        if required not in values:
            raise ConfigError(f"missing required key {required!r}", required)
    return ChainConfig(**values)


@dataclass(frozen=True)
class RealSpaceModel:
    """Position couplings ``V`` and measurement matrix ``M`` (both ``L x L``)."""

    config: ChainConfig
    V: np.ndarray
    M: np.ndarray

    @property
    def K(self) -> np.ndarray:
        """Complex couplings of the effective Hamiltonian, ``V - i gamma M``."""
        return self.V - 1j * self.config.gamma * self.M

    def summary(self) -> dict:
        cfg = self.config
        return {
            "L": cfg.L,
            "R": cfg.R,
            "m": cfg.m,
            "mass_used": cfg.mass,
            "gamma": cfg.gamma,
            "omega0": cfg.omega0,
            "n_cells": cfg.n_cells,
            "rank_M": int(np.linalg.matrix_rank(self.M)),
            "V_spectrum_min": float(np.linalg.eigvalsh(self.V)[0]),
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2)


def laplacian_couplings(L: int, mass: float) -> np.ndarray:
    """``-nabla^2 + mass^2`` on a ring; neighbours accumulate for ``L <= 2``."""
    V = (2.0 + mass**2) * np.eye(L)
    idx = np.arange(L)
    np.add.at(V, (idx, (idx + 1) % L), -1.0)
    np.add.at(V, (idx, (idx - 1) % L), -1.0)
    return V


def measurement_matrix(L: int, R: int) -> np.ndarray:
    return np.kron(np.eye(L // R), np.ones((R, R)))


def build_model(config: ChainConfig) -> RealSpaceModel:
    if config.mass != config.m:
        logger.warning("m = 0 regularised to %g", config.mass)
    V = laplacian_couplings(config.L, config.mass)
    M = measurement_matrix(config.L, config.R)
    return RealSpaceModel(config, V, M)


@dataclass(frozen=True)
class InitialState:
    """Product of ground states of decoupled oscillators of frequency ``omega0``."""

    omega0: float
    kind: str = "product-ground-state"

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ConfigError(f"omega0 must be > 0, got {self.omega0!r}", "omega0")

    @property
    def xx(self) -> float:
        return 1.0 / (2.0 * self.omega0)

    @property
    def pp(self) -> float:
        return self.omega0 / 2.0

    @property
    def xp(self) -> float:
        return 0.0


def initial_covariance(config: ChainConfig) -> np.ndarray:
    """Symmetrised covariance of ``(x_1..x_L, p_1..p_L)`` at ``t = 0``."""
    state = InitialState(config.omega0)
    L = config.L
    cov = np.zeros((2 * L, 2 * L))
    cov[:L, :L] = state.xx * np.eye(L)
    cov[L:, L:] = state.pp * np.eye(L)
    return cov
