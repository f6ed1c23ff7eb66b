"""Random matrix products, suspension flows, and drift diagnostics.

Numerics for stationary measures of matrix semigroup actions: Lyapunov
exponents and limit directions, suspension flows with last-jump laws,
positive-roof coboundary construction, torus and lattice-space drift
and recurrence checks, and exact finite-orbit equidistribution.
"""

__version__ = "0.1.0"

from .errors import (
    EstimateFailure,
    InputError,
    LowConfidenceDirection,
    PreconditionError,
    UnsupportedConfiguration,
)
from .matrices import (
    ExactMatrix,
    GeneratorSystem,
    IntMatrix,
    LogScaledMatrix,
    exact_word_product,
    format_system,
    irreducibility_certificate,
    parse_system,
    proximality_certificate,
    singular_values,
    word_product,
)
from .shift import (
    CoboundarySolution,
    CocycleSpec,
    LastJumpLawReport,
    PrefixedStream,
    SuspensionState,
    WordStream,
    birkhoff_sum,
    last_jump_law_test,
    last_jump_sample,
    mix64,
    parse_cocycle,
    solve_coboundary,
    suspension_advance,
    suspension_rate_check,
    uniforms_at,
)
from .asymptotics import (
    ContractionReport,
    LimitDirection,
    LyapunovEstimate,
    contraction_fraction,
    furstenberg_increment,
    limit_direction,
    limit_measure_pushforward,
    lyapunov_furstenberg,
    lyapunov_norm_growth,
    pushforward_convergence,
)
from .torus import (
    CapExceeded,
    EmpiricalMeasure,
    TorusDriftParams,
    TorusPoint,
    act_torus,
    birkhoff_kakutani_average,
    drift_check_torus,
    enumerate_finite_orbit,
    finite_orbit_equidistribution,
    fourier_coefficient,
    recurrence_off_finite_test,
    walk_empirical_measure,
)
from .lattices import (
    HeightParams,
    UnimodularLattice,
    drift_check_lattice,
    em_height,
    hc_check,
    pair_distance,
    recurrence_compact_test,
    reduce_basis,
    sl2_exp,
    sl2_log,
    two_point_v,
)

__all__ = [
    "__version__",
    "EstimateFailure",
    "InputError",
    "LowConfidenceDirection",
    "PreconditionError",
    "UnsupportedConfiguration",
    "ExactMatrix",
    "GeneratorSystem",
    "IntMatrix",
    "LogScaledMatrix",
    "exact_word_product",
    "format_system",
    "irreducibility_certificate",
    "parse_system",
    "proximality_certificate",
    "singular_values",
    "word_product",
    "CoboundarySolution",
    "CocycleSpec",
    "LastJumpLawReport",
    "PrefixedStream",
    "SuspensionState",
    "WordStream",
    "birkhoff_sum",
    "last_jump_law_test",
    "last_jump_sample",
    "mix64",
    "parse_cocycle",
    "solve_coboundary",
    "suspension_advance",
    "suspension_rate_check",
    "uniforms_at",
    "ContractionReport",
    "LimitDirection",
    "LyapunovEstimate",
    "contraction_fraction",
    "furstenberg_increment",
    "limit_direction",
    "limit_measure_pushforward",
    "lyapunov_furstenberg",
    "lyapunov_norm_growth",
    "pushforward_convergence",
    "CapExceeded",
    "EmpiricalMeasure",
    "TorusDriftParams",
    "TorusPoint",
    "act_torus",
    "birkhoff_kakutani_average",
    "drift_check_torus",
    "enumerate_finite_orbit",
    "finite_orbit_equidistribution",
    "fourier_coefficient",
    "recurrence_off_finite_test",
    "walk_empirical_measure",
    "HeightParams",
    "UnimodularLattice",
    "drift_check_lattice",
    "em_height",
    "hc_check",
    "pair_distance",
    "recurrence_compact_test",
    "reduce_basis",
    "sl2_exp",
    "sl2_log",
    "two_point_v",
]
