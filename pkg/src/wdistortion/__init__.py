"""Wasserstein distortion for finite-alphabet sequences and low-rate codes."""

__version__ = "0.1.0"

from .coding import (
    EncodedMessage,
    MalformedMessageError,
    PermutationSchemeConfig,
    RateRegion,
    SourceSpec,
    bound_independent,
    bound_permutation,
    classify_rate_region,
    converse_leading_term,
    converse_lower_bound,
    independent_realization,
    permutation_decode,
    permutation_encode,
    permutation_rate,
    sample_source,
)
from .distortion import (
    FeatureMap,
    InsufficientGuardError,
    PooledMeasure,
    SymbolSequence,
    block_distortion,
    distortion_at,
    distortion_profile,
    pooled_distributions,
    pooled_measure,
)
from .experiments import (
    ExponentFit,
    NPolicy,
    RegionAssertionError,
    RegionPoint,
    Scheme,
    SweepResult,
    fidelity_limit_experiment,
    fit_exponent,
    realism_limit_experiment,
    region_report,
    run_sweep,
)
from .pooling import (
    InsufficientHorizonError,
    PoolingPmf,
    cesaro_check,
    check_axioms,
    check_family_limits,
    pmf_value,
    tail_mass,
    truncation_radius,
)
from .transport import (
    CapabilityError,
    CostMatrix,
    DiscreteDistribution,
    sandwich_bounds,
    w2sq_exact,
    w2sq_uniform,
    wp_p_sorted,
    wp_p_weighted,
)
