"""Monte Carlo ruin probabilities for a compound renewal insurance model whose
reserve is invested in a geometric Levy asset."""

__version__ = "0.1.0"

from .config import ConfigError, ExperimentConfig
from .cycles import CycleBatch, CycleSample, CycleSpec, PathGridConfig, simulate_cycle, simulate_cycles
from .distributions import (
    AtomicJumps,
    DensityJumps,
    DeterministicTimes,
    DoubleExponentialLogJumps,
    ExponentialClaims,
    ExponentialTimes,
    GammaTimes,
    JumpMeasure,
    LogNormalClaims,
    ParetoClaims,
    UniformClaims,
    UniformJumps,
    UniformTimes,
)
from .model import (
    BetaResult,
    BetaStatus,
    LevyModel,
    ModelError,
    cumulant,
    derive_log_price_model,
    domain_bounds,
    find_beta,
    gbm,
    right_derivative_at_zero,
    validate_theorem_conditions,
)
from .rng import stream
from .ruin import (
    KestenDiagnostics,
    PerpetuitySample,
    RuinEstimate,
    direct_ruin_estimate,
    empirical_unboundedness_probe,
    estimate_gbar,
    finite_horizon_ruin,
    kesten_diagnostics,
    ruin_bounds,
    ruin_table,
    sample_perpetuities,
    sample_perpetuity,
    simulate_direct,
)
from .tail import TailEstimate, analyze_tail, estimate_c_plus, hill_estimator, hill_stability_scan, loglog_slope
