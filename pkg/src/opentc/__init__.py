"""Open Tavis-Cummings toolkit.

N identical two-level emitters, incoherently pumped, coupled to one lossy
cavity mode: sparse operators, Lindblad steady states and dynamics, quantum
trajectories, the cavity-eliminated collective model, and the photon
statistics derived from all of them.
"""

from .collective import (
    CoupledSpace,
    CoupledState,
    ReducedParams,
    analytic_g2_three,
    analytic_g2_two,
    analytic_n3_populations,
    build_reduced_liouvillian,
    coupled_basis,
    degeneracy,
    emitter_space,
    independent_emitter_g2,
    independent_g2_tau,
)
from .errors import (
    ConfigError,
    CutoffConvergenceError,
    InsufficientSamplesError,
    IntegrationError,
    NonUniqueSteadyStateError,
    OpenTCError,
    SiteSymmetryError,
    SpaceMismatchError,
    SpaceTooLargeError,
    StateValidationError,
    SteadyStateConvergenceError,
    ZeroIntensityError,
)
from .liouville import (
    DensityMatrix,
    SteadyStateOptions,
    Superoperator,
    build_hamiltonian,
    build_liouvillian,
    converge_cutoff,
    dissipator,
    evolve,
    pure_state,
    steady_state,
)
from .mcwf import (
    EnsembleEstimate,
    TrajectoryConfig,
    default_trajectory_config,
    effective_hamiltonian,
    estimate_steady,
    jump_operators,
    run_trajectory,
)
from .observables import (
    PopulationSet,
    expectation,
    g2_tau,
    g2_zero_cavity,
    g2_zero_collective,
    populations,
)
from .operators import (
    CompositeSpace,
    FlatSpace,
    SparseOperator,
    SystemParams,
    basis_ket,
    build_space,
    cavity_op,
    collective_op,
    emitter_op,
    identity,
)
from .sweep import SweepSpec, emit_csv, run_point, run_sweep

__all__ = [name for name in dir() if not name.startswith("_")]
