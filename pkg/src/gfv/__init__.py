"""Growth-fragmentation solver with variability in growth rate.

Simulates the size- and trait-structured division equation, computes the
Malthus parameter and the direct/adjoint eigenvectors by power iteration on
the discrete evolution, and monitors relative-entropy diagnostics.
"""

__version__ = "0.1.0"

from .analytics import (
    ConjectureRow,
    SandwichReport,
    check_sandwich,
    critical_p0,
    duality_residual,
    evaluate_conjecture,
    lambda_fast_subpop,
    lambda_with_death,
)
from .dynamics import (
    Population,
    Schedule,
    Stepper,
    Trajectory,
    initial_profile,
    moment,
    renormalized_values,
    simulate,
    step,
)
from .entropy import (
    SQUARE,
    BehaviorVerdict,
    EntropyFunction,
    detect_oscillation,
    dissipation,
    gre,
    l1_phi_distance,
    rho_weight,
)
from .errors import CflError, ConfigError, GfvError, NumericsError, SupportError
from .grid import Grid, build_grid, double_index, integrate
from .model import (
    DivisionLaw,
    FeatureSet,
    GrowthLaw,
    Kernel,
    KernelReport,
    Model,
    build_named_kernel,
    validate_kernel,
    validate_model,
)
from .operator import SemiDiscreteOperator, apply, apply_adjoint, assemble, dense_matrix
from .spectral import (
    EigenPair,
    averaged_estimate,
    estimate_lambda_gamma,
    estimate_lambda_n,
    estimate_lambda_tau,
    power_iterate,
    solve_eigenproblem,
)

__all__ = [name for name in dir() if not name.startswith("_")]
