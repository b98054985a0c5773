"""Lindblad-corrected Ramsey fringes for atomic clocks.

Generic Lindblad dynamics (``dynamics``), a pulse-dark-pulse Ramsey simulator
(``ramsey``), fringe shape metrics and fitting (``fringe``), bound arithmetic
(``bounds``) and the ``clock`` CLI. Internal units are rad/s with hbar = 1.
"""
from .bounds import HBAR_EV_S, bound_report, fractional_imprecision, gamma_bound_ev, pointer_level_spacing
from .dynamics import (
    LindbladGenerator,
    StableBasisModel,
    analytic_propagate,
    choi_psd_check,
    coherence_decay_matrix,
    entropy_condition_check,
    liouvillian_superoperator,
    propagate,
    propagate_rk4,
    stability_check,
    stable_basis_model,
)
from .errors import (
    ClockError,
    GridTooCoarseError,
    InputError,
    InvalidStateError,
    NumericalFailure,
    PreconditionError,
    SchemaError,
    UnderResolvedError,
)
from .fringe import (
    FitResult,
    FringeScan,
    ShapeMetrics,
    fit_fringe,
    monte_carlo_fit,
    scan_fringe,
    shape_metrics,
    three_level_closure,
)
from .numerics import DensityMatrix, hermitian_eigendecomposition, matrix_exponential, von_neumann_entropy
from .ramsey import (
    ClockTransition,
    FringeParams,
    RamseyConfig,
    analytic_pe,
    exact_driven_oracle,
    model_from_params,
    pulse_unitary,
    ramsey_sequence,
)

__version__ = "0.1.0"
