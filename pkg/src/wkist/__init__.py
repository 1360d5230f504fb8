"""Scattering and inverse-scattering toolkit for a hodograph-linked
derivative Schroedinger flow.

Pipeline:  potential -> Jost solutions -> reflection coefficient
           -> explicit time evolution -> jump RHP -> moments
           -> slope -> hodograph inversion -> potential.

The submodules follow those stages: ``lattice`` (grids, Cauchy
projections), ``lax`` (gauge fields, conserved functionals),
``direct_scattering`` (Jost propagation, transition matrix),
``rhp`` (jump factorizations, Beals-Coifman solve, moments),
``reconstruction`` (slope to potential, hodograph maps),
``soliton`` (closed forms), ``pde_oracle`` (independent integrator),
``cli`` (end-to-end runs).
"""

__version__ = "0.1.0"

from .errors import (
    AT_SINGULARITY,
    DiagnosticUnreliableError,
    EvolutionDivergedError,
    HodographInconsistentError,
    HodographUnsolvedError,
    InvalidArgumentError,
    NumericalError,
    PossibleBoundStateError,
    RangeError,
    RegimeError,
    ResolutionExceededError,
    RhpUnsolvedError,
    SlopeConditionError,
    WkiError,
)
from .lattice import (
    GridFunction,
    SpatialGrid,
    SpectralGrid,
    cauchy_minus,
    cauchy_plus,
    cumulative_integral,
    make_spatial_grid,
    make_spectral_grid,
)
from .lax import (
    AknsFields,
    Potential,
    akns_potentials,
    conserved_E1,
    conserved_E2,
    eigvec_matrix,
    make_potential,
)
from .direct_scattering import (
    JostSolution,
    ScatteringData,
    check_a_asymptotics,
    evolve_reflection,
    propagate_jost,
    reflection_coefficient,
    transition_matrix,
)
from .rhp import (
    JumpFactorization,
    RHPSolution,
    build_factorization,
    delta_function,
    dx_m1,
    m1_moment,
    phase,
    solve_dmu,
    solve_mu,
    suggest_z_min,
)
from .reconstruction import (
    ReconstructionResult,
    epsilon_fixed_point,
    inverse_transform,
    qh_from_slope,
    resample_q,
    x_from_m11,
)
from .soliton import (
    SolitonParams,
    soliton_epsilon,
    soliton_m1_entries,
    soliton_pde_residual,
    soliton_peak,
    soliton_q,
    soliton_qh,
    soliton_slope,
)
from .pde_oracle import EvolutionRun, evolve, wki_rhs

__all__ = [name for name in dir() if not name.startswith("_")]
