"""stochequil: random economic equilibria and their large-deviation entropy.

The package computes equilibrium prices of randomly drawn exchange
economies, the exponential decay rate (entropy) of observing equilibria
away from the expected price, the canonical exponentially tilted
distributions describing the conditioned micro state, and Monte Carlo /
exact-enumeration verification of all of it — plus ideal-gas fixtures
whose closed forms pin down the generic engine.
"""

from .canonical import (
    CanonicalMicro,
    CanonicalSampler,
    canonical_expectation,
    make_canonical,
    make_composite_canonical,
    sample_canonical,
    tilt_micro,
)
from .entropy import (
    BivariateConjugate,
    CdTldReport,
    CGFValue,
    ConjugateSolution,
    EntropyReport,
    PepFeasibility,
    RankReport,
    bivariate_cgf,
    bivariate_entropy,
    cd_tld_diagnostic,
    cgf,
    cgf_from_support,
    check_pep,
    check_pep_values,
    entropy,
    full_rank_diagnostic,
    minimize_entropy_over_price,
    solve_bivariate_conjugate,
    solve_conjugate,
)
from .equilibrium import (
    EquilibriumResult,
    SurvivalSpec,
    bisection_equilibrium,
    cd_equilibrium,
    cd_equilibrium_from_counts,
    expected_equilibrium,
    expected_equilibrium_result,
    left_stationary,
    survival_count,
)
from .idealgas import (
    GasEntropy,
    GasSpec,
    box_quadrature,
    gas_canonical_pdf,
    gas_cgf_fixture,
    gas_entropy,
    gas_internal_energy,
    gas_partition,
)
from .model import (
    Continuous,
    Discrete,
    EconomyModel,
    Price,
    STRUCTURE_REGISTRY,
    StructureFunction,
    cd_characteristics,
    cd_view,
    interior_price,
    make_cd_structure,
    register_structure,
    structure_from_pointwise,
    total_excess_demand,
    validate_price,
    walras_completion,
)
from .montecarlo import (
    CltTrend,
    EmpiricalDistribution,
    Estimate,
    clt_covariance,
    clt_entropy_approx,
    conditional_empirical,
    conditional_macro_mean,
    importance_probability,
    naive_probability,
    oracle_conditional,
    oracle_probability,
)

from . import errors, reference

__version__ = "0.1.0"
