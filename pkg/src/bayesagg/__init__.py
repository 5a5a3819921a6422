"""Learning of optimal forecast aggregation in partial-evidence
Bayesian environments: simulation, online-learning aggregators,
impossibility constructions and an experiment harness."""

from .aggregators import (
    AggregatorConfig,
    Classification,
    ConstantHalfAggregator,
    DynamicPriorAwareAggregator,
    SimpleAverageAggregator,
    StaticPriorIgnorantAggregator,
    best_expert_hindsight,
    classify_profile,
    extreme_forecast,
    make_aggregator,
)
from .adversarial import (
    BinaryJointStructure,
    example1,
    extreme_lemma_oracle,
    prior_flip_adversary,
    proposition1_instance,
    regret_floor,
)
from .harness import RegretTrace, RunConfig, random_injective_environment, run, sweep
from .logodds import (
    SurrogateLossInstance,
    expected_log_loss,
    expected_regret,
    log_odds,
    logit_inverse,
    optimal_log_odds,
    surrogate_gradient,
    surrogate_loss,
)
from .ogd import OgdState, ogd_init, ogd_step, project_ball
from .spectral import (
    SpectralReport,
    kernel_vector_nonzero_sum,
    left_inverse,
    min_singular_value,
    optimal_hypothesis,
)
from .structures import (
    EvidenceMatrix,
    InformationStructure,
    RoundSample,
    SignalDistribution,
    StructureError,
    brute_force_optimal,
    expert_forecast,
    make_structure_from_posteriors,
    optimal_forecast,
    sample_round,
)

__version__ = "0.1.0"
