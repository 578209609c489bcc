"""Entanglement dynamics of a harmonic chain under continuous monitoring of block positions.

Modules
-------
model
    Configuration, real-space couplings and the initial product state.
bloch
    Bloch Hamiltonians, canonical upper-triangular forms and band expansions.
dynamics
    Riccati evolution of the per-wavevector correlation matrices and the
    closed-form slow-mode flow.
entropy
    Real-space covariance assembly, Gaussian entropies, the quasiparticle
    prediction, square-root fits and scaling collapse.
oracle
    Truncated Fock-space reference dynamics for chains of up to three sites.
io, cli
    Persistence and the ``monitored-chain`` command line.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    AssemblyError,
    BandSortingError,
    CanonicalFormError,
    ChainError,
    ConfigError,
    ConvergenceError,
    CutoffLeakError,
    FitWindowError,
    NonPhysicalStateError,
    PoorFitError,
    QuadratureError,
    SingularMatrixError,
    StepSizeError,
)
from .model import ChainConfig, InitialState, RealSpaceModel, build_model, initial_covariance, load_config  # noqa: F401
from .bloch import BandExpansion, BlochBlock, CanonicalForm, bandstructure, bloch_block, expand_band, triangularize  # noqa: F401
from .dynamics import (  # noqa: F401
    CorrelationField,
    SlowModeState,
    density_decay,
    integrate_riccati,
    project_gapless,
    riccati_rhs,
    slow_mode_exact,
)
from .entropy import asymptotic_coefficient, assemble_covariance, fit_sqrt, gaussian_entropy, qp_entropy, scaling_collapse  # noqa: F401
