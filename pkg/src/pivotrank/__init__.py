"""Model-agnostic list-wise re-ranking orchestration.

The package coordinates window-sized permutation calls against a pluggable
backend (an oracle over judgments, a scripted table, or a remote JSON
service) and accounts for every call in an inference ledger. Three
strategies are provided: a single window over the top of the ranking, a
bottom-up sliding window, and a top-down pivot partitioner that spends a
candidate budget on the partitions most likely to hold top documents.
"""

from .core import (
    CallRecord,
    DocEntry,
    InferenceLedger,
    JudgmentSet,
    MODES,
    PartitionPlan,
    PlanError,
    Query,
    RankEntry,
    RankedList,
    RankingError,
    Stage,
    ValidationError,
    make_ranked_list,
    truncate_to_depth,
    validate,
)
from .evalmetrics import (
    METRIC_CUTOFFS,
    AggregateSummary,
    MetricReport,
    TostResult,
    aggregate,
    dcg,
    evaluate_run,
    ndcg_at_k,
    paired_tost,
    precision_at_k,
)
from .partition import (
    DEFAULT_MAX_PARALLEL,
    compare_partition,
    rerank,
    select_pivot,
    sequential_dispatch,
    single_window_rerank,
    sliding_inference_count,
    sliding_window_rerank,
    tdpart_rerank,
    threaded_dispatch,
    worst_case_inferences,
)
from .permute import (
    BackendError,
    OraclePermuter,
    PermutationResult,
    PermuteRequest,
    Permuter,
    ProtocolError,
    RemotePermuter,
    RepairEvent,
    ScriptError,
    ScriptedPermuter,
    oracle_permute,
    remote_permute,
    repair_permutation,
    scripted_permute,
)
from .synthgen import (
    EligibilityError,
    JudgedPools,
    ORDERINGS,
    SyntheticSpec,
    build_pools,
    derive_seed,
    evolve_ranking,
    filter_eligible_queries,
    generate_grid,
    generate_initial_ranking,
    order_ranking,
    read_grid,
    round_half_up,
    write_grid,
)
from .trecio import (
    ParseError,
    parse_corpus,
    parse_qrels,
    parse_queries,
    parse_run,
    write_qrels,
    write_run,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateSummary",
    "BackendError",
    "CallRecord",
    "DEFAULT_MAX_PARALLEL",
    "DocEntry",
    "EligibilityError",
    "InferenceLedger",
    "JudgedPools",
    "JudgmentSet",
    "METRIC_CUTOFFS",
    "MODES",
    "MetricReport",
    "ORDERINGS",
    "OraclePermuter",
    "ParseError",
    "PartitionPlan",
    "PermutationResult",
    "PermuteRequest",
    "Permuter",
    "PlanError",
    "ProtocolError",
    "Query",
    "RankEntry",
    "RankedList",
    "RankingError",
    "RemotePermuter",
    "RepairEvent",
    "ScriptError",
    "ScriptedPermuter",
    "Stage",
    "SyntheticSpec",
    "TostResult",
    "ValidationError",
    "aggregate",
    "build_pools",
    "compare_partition",
    "dcg",
    "derive_seed",
    "evaluate_run",
    "evolve_ranking",
    "filter_eligible_queries",
    "generate_grid",
    "generate_initial_ranking",
    "make_ranked_list",
    "ndcg_at_k",
    "oracle_permute",
    "order_ranking",
    "paired_tost",
    "precision_at_k",
    "read_grid",
    "remote_permute",
    "repair_permutation",
    "rerank",
    "round_half_up",
    "scripted_permute",
    "select_pivot",
    "sequential_dispatch",
    "single_window_rerank",
    "sliding_inference_count",
    "sliding_window_rerank",
    "tdpart_rerank",
    "threaded_dispatch",
    "truncate_to_depth",
    "validate",
    "worst_case_inferences",
    "write_grid",
    "write_qrels",
    "write_run",
    "__version__",
]
