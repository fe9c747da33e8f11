"""Rate functionals of finite-state Markov chains, cross-validated three ways.

The package computes the occupation-measure and occupation-flux rate
functionals of an ergodic chain, the composite rate of windowed block
statistics built from endpoint-conditioned (bridge) laws, and the
inf-convolution and contraction identities tying them together, with
Monte Carlo decay fits as an end-to-end check.
"""

from .chain import (
    ChainError,
    GeneratorMatrix,
    NegativeOffDiagonal,
    NonZeroRowSum,
    ProbVector,
    Reducible,
    TransitionKernel,
    dtmc_invariant,
    invariant_measure,
    is_irreducible,
    transition_at,
    validate_generator,
)
from .ratefun import (
    FluxField,
    NegativeInput,
    NonConvergence,
    PairMeasure,
    VariationalResult,
    bfg_rate,
    cond_rate,
    divergence,
    dvg_objective,
    dvg_rate,
    pair_empirical_rate,
    rel_entropy,
    theorem_rate,
)
from .conjugate import (
    ConjugateEstimate,
    ConjugateOracle,
    DiscreteLaw,
    EmpiricalLaw,
    PoissonLaw,
    SuperlinearityReport,
    ZeroRate,
    abs_log_mgf,
    chernoff_bound,
    conjugate_at,
    conjugate_or_inf,
    flux_mgf_bound,
    load_samples,
    log_mgf,
    save_samples,
    superlinearity_check,
)
from .simulate import (
    AbsorbingState,
    DiscreteEmbedding,
    EmpiricalPair,
    PathRecord,
    accumulate,
    batch_occupations,
    batch_pair_statistics,
    cumulative_flux,
    discrete_embedding,
    gillespie,
    occupation,
)
from .bridge import (
    BridgeSpec,
    DegenerateDenominator,
    RejectionBudgetExceeded,
    bridge_generator,
    bridge_transition,
    bridge_transition_row,
    conditional_samples,
    sample_bridge,
)
from .estimate import (
    ContractionResult,
    DecayFit,
    InfConvResult,
    InsufficientHits,
    ball_rate,
    build_oracle,
    contract_dvg_from_bfg,
    infconv_bfg,
    infconv_dvg,
    mc_decay_rate,
)

__version__ = "0.1.0"
