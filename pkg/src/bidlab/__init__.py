"""Safe bidding and no-regret learning in repeated uniform-price auctions."""

from .auction import (
    EPS_GAP,
    CompetingBids,
    MUniformStrategy,
    RoundOutcome,
    TiePolicy,
    ValuationCurve,
    clear_auction,
    feasible_over_history,
    per_unit_price,
    roi_feasible,
)
from .strategies import (
    ENUM_CAP,
    SafeClassSpec,
    StrategyClass,
    adversary_violating,
    brute_force_best,
    classify,
    enumerate_undominated,
    is_safe,
    size_undominated,
    sum_to_max_value,
)
from .dag import (
    DagPath,
    LayeredDag,
    assign_offline_weights,
    build_covering_set,
    build_dag,
    edge_marginals,
    max_weight_path,
    num_edges,
    path_to_strategy,
    round_weights,
    sample_path,
    strategy_to_path,
    update_probabilities,
)
from .instances import (
    BenchmarkInstance,
    FeasibleMPrime,
    FeasibleSameM,
    RegretScenarioPair,
    RichnessEstimate,
    SafeMPrime,
    feasible_upper_bound,
    gen_cumulative_impossibility,
    gen_mmbar_tight,
    gen_pouf_tight_general,
    gen_pouf_tight_m1,
    gen_regret_lb,
    regret_lb_delta,
    richness_ratio,
)
from .learners import (
    AdaptiveBanditLearner,
    BanditFeedback,
    BanditLearner,
    ContextualAdversarialLearner,
    ContextualStochasticLearner,
    FullInfoLearner,
    IIDUniformAdversary,
    LearnerConfig,
    LearnerMode,
    PriceSqueezeAdversary,
    ReplayAdversary,
    ShiftedWindowLearner,
    TRACE_FIELDS,
    TraceRecord,
    make_learner,
    run_rounds,
)
from .ets import (
    AuctionAggregates,
    ReconstructionReport,
    ShapeClass,
    classify_shape,
    grid_search_f,
    load_bundled_corpus,
    read_aggregates_csv,
    reconstruct,
    reconstruct_corpus,
    to_competing_bids,
)

__version__ = "0.1.0"
