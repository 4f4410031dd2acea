"""Union confidence intervals for causal effects after graph discovery.

The package discovers equivalence-class patterns with a tiered,
order-independent PC search, repeats the search over randomly perturbed
test statistics, screens the resulting graphs for validity, computes a
covariate-adjusted effect estimate for every surviving parent set, and
merges the per-graph confidence intervals into one union interval whose
coverage accounts for the selection step.
"""

from .discovery import (
    DiscoveryResult,
    FisherZTest,
    OracleCiTest,
    ResampleBatch,
    ResampleConfig,
    fixed_threshold_test,
    max_test_count,
    pc_stable_tiered,
    recovery_error_bound,
    resampled_pc_runs,
    threshold_shrinkage,
)
from .exceptions import (
    ConfigError,
    CycleError,
    DataError,
    DegreesOfFreedomError,
    EnumerationOverflowError,
    GraphFormatError,
    NoValidGraphsError,
    SingularityError,
)
from .graphs import (
    BackgroundKnowledge,
    Dag,
    MixedGraph,
    SepsetTable,
    TierOrder,
    apply_meek_rules,
    consistent_extension,
    cpdag_from_dag,
    d_separated,
    enumerate_dags,
    is_acyclic,
    is_valid_cpdag,
    orient_v_structures,
    parents,
    parse_dot,
    parse_edge_list,
    vstructures,
    write_dot,
    write_edge_list,
)
from .inference import (
    ADJUST_PARENTS,
    ADJUST_TIER_BLOCK,
    AggregationReport,
    HeuristicResult,
    Interval,
    IntervalUnion,
    aggregate_ci,
    c_star_heuristic,
    effect_union_report,
    estimates_for_graph,
    naive_ci,
    oracle_ci,
    screen,
    wald_interval,
)
from .simulation import (
    BenchRecord,
    ScenarioConfig,
    WeightedDag,
    draw_and_scale_weights,
    random_dag,
    read_bench_csv,
    run_scenario,
    sample_sem,
    sweep_c_star,
    true_effect,
    write_bench_csv,
)
from .stats import (
    DataMatrix,
    EffectEstimate,
    GaussianSuffStats,
    KeyedRng,
    TestStatistic,
    correlation_from_data,
    entry_hash,
    fisher_z,
    keyed_uniform,
    normal_cdf,
    normal_quantile,
    ols_effect,
    partial_correlation,
    resample_statistic,
    run_hash,
    submatrix_inverse,
)

__version__ = "0.1.0"

__all__ = [
    "ADJUST_PARENTS",
    "ADJUST_TIER_BLOCK",
    "AggregationReport",
    "BackgroundKnowledge",
    "BenchRecord",
    "ConfigError",
    "CycleError",
    "Dag",
    "DataError",
    "DataMatrix",
    "DegreesOfFreedomError",
    "DiscoveryResult",
    "EffectEstimate",
    "EnumerationOverflowError",
    "FisherZTest",
    "GaussianSuffStats",
    "GraphFormatError",
    "HeuristicResult",
    "Interval",
    "IntervalUnion",
    "KeyedRng",
    "MixedGraph",
    "NoValidGraphsError",
    "OracleCiTest",
    "ResampleBatch",
    "ResampleConfig",
    "ScenarioConfig",
    "SepsetTable",
    "SingularityError",
    "TestStatistic",
    "TierOrder",
    "WeightedDag",
    "aggregate_ci",
    "apply_meek_rules",
    "c_star_heuristic",
    "consistent_extension",
    "correlation_from_data",
    "cpdag_from_dag",
    "d_separated",
    "draw_and_scale_weights",
    "effect_union_report",
    "entry_hash",
    "enumerate_dags",
    "estimates_for_graph",
    "fisher_z",
    "fixed_threshold_test",
    "is_acyclic",
    "is_valid_cpdag",
    "keyed_uniform",
    "max_test_count",
    "naive_ci",
    "normal_cdf",
    "normal_quantile",
    "ols_effect",
    "oracle_ci",
    "orient_v_structures",
    "parents",
    "parse_dot",
    "parse_edge_list",
    "partial_correlation",
    "pc_stable_tiered",
    "random_dag",
    "read_bench_csv",
    "recovery_error_bound",
    "resample_statistic",
    "resampled_pc_runs",
    "run_hash",
    "run_scenario",
    "sample_sem",
    "screen",
    "submatrix_inverse",
    "sweep_c_star",
    "threshold_shrinkage",
    "true_effect",
    "vstructures",
    "wald_interval",
    "write_bench_csv",
    "write_dot",
    "write_edge_list",
]
