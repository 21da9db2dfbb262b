"""Steady states of driven, closely packed two-level emitters.

The package quantifies when correlated spontaneous emission together with
strong collective dephasing enhances the stationary drive-axis
polarization (and therefore the dipole force) of an emitter ensemble
beyond the independent-emitter value.
"""

from .geometry import (
    DegenerateConfigurationError,
    EmitterConfiguration,
    EnsembleStats,
    PairCoefficients,
    circular_configuration,
    correlated_decay,
    derive_seed,
    dipole_coupling,
    ensemble_stats,
    load_positions,
    pair_coefficients,
    pair_dephasing_product,
    sample_random_configuration,
    save_positions,
)
from .liouvillian import (
    DriveParams,
    MasterEquationSpec,
    apply_liouvillian,
    build_hamiltonian,
    build_liouvillian,
    expectation,
)
from .steady import (
    DegenerateSteadyStateError,
    SteadyStateResult,
    dipole_force,
    eta,
    independent_sx,
    optimal_detuning,
    steady_state,
)
from .two_emitter import (
    TwoEmitterParams,
    TwoEmitterSystem,
    assemble_two_emitter_system,
    eta_limit_large_dephasing,
    eta_limit_no_dephasing,
    steady_state_n2,
    steady_sx_n2,
)
from .dressed import RateEquationModel, dressed_rate_steady_state
from .effective import (
    EffectiveMESpec,
    build_effective_generator,
    effective_steady_state,
    effective_steady_sx,
    kappa,
    sx_reconstruction_factor,
)
from .trajectories import TrajectoryEstimate, trajectory_steady_sx
from .sweeps import (
    SweepRow,
    SweepSpec,
    run_circle_sweep,
    run_contour_n2,
    run_drive_sweep,
    run_separation_sweep,
    run_single,
    rows_to_csv,
)

__version__ = "0.1.0"
