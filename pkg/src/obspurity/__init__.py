"""Observable purity and the sensitivity of analog-quantum-simulator outputs
to static and dynamical imperfections.
"""

from .dynamics import (
    DynamicsScenario,
    ErrorSeries,
    asymptotic_error,
    asymptotic_haar_error,
    cumulative_series,
    error_series,
    fit_lambda,
    infidelity_series,
    perturbed_evolution,
    run_ensemble,
    transient_factor,
    uniform_grid,
)
from .ensembles import (
    PerturbationModel,
    SeedSpec,
    StateEnsemble,
    characteristic_f,
    haar_state,
    haar_unitary,
    orthogonal_companion,
    sample_perturbation,
)
from .exceptions import (
    ConfigError,
    ConvergenceError,
    DegenerateSpectrumWarning,
    DimensionError,
    NonHermitianError,
    SizeGuardError,
    TrivialObservableError,
)
from .metrics import (
    ObservableReport,
    build_report,
    diagonal_ensemble,
    infinite_time_average,
    observable_purity,
    variation_distance,
)
from .operators import DensityOperator, HermitianOperator, PureState, eigendecompose, evolve, expectation
from .spins import (
    LmgParams,
    SpinSystem,
    TimParams,
    collective_spin,
    lmg_hamiltonian,
    observable_family,
    partition_projector,
    pauli_string,
    stretched_state,
    sx_projector,
    tim_hamiltonian,
    tim_purity_observables,
)
from .static import (
    MixedNoiseSpec,
    PerturbedStatePair,
    haar_average_delta_sq,
    mixed_delta,
    mixed_relative_error,
    relative_delta,
)

__version__ = "0.1.0"
