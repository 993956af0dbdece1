"""Entropy-probed bucket hashing over a simulated key-value cluster.

The package measures, at desk scale, how two ways of distributing an LSH
index trade network traffic against load balance: routing by full bucket id
(simple) versus routing by a second hash layer over bucket ids (layered).
"""

from .bench import (
    CSV_COLUMNS,
    RunMetrics,
    TuneStep,
    compute_recalls,
    execute_run,
    run_sweep,
    tune_outer_width,
    write_metrics_csv,
    write_results_csv,
    write_tune_csv,
)
from .cluster import (
    ClusterConfig,
    MachineLoad,
    ShuffleLedger,
    assign_machine,
    load_summary,
    run_job,
)
from .core import (
    DEFAULT_EPSILON,
    BucketId,
    InnerHashFamily,
    LshParams,
    MachineKey,
    OuterHash,
    collision_probability,
    composite_key,
    distance_threshold,
    inverse_collision_probability,
    nominal_collision_probs,
    sample_inner_family,
    sample_outer_hash,
    suggest_concat_length,
)
from .data_io import (
    Dataset,
    GroundTruth,
    brute_force_near,
    generate_planted,
    ground_truth,
    ground_truth_cache_key,
    load_or_compute_ground_truth,
    planted_parent_ids,
    read_ground_truth,
    read_vectors,
    write_ground_truth,
    write_vectors,
)
from .errors import DimensionError, FormatError, IntegrityError, ParameterError
from .probe import (
    OffsetSet,
    ProbePlan,
    build_probe_plan,
    default_offset_count,
    probe_buckets,
    probe_outer_keys,
    sample_offsets,
)
from .schemes import (
    DataRecord,
    KeyValueMessage,
    MatchResult,
    QueryRecord,
    Scheme,
    data_message_size,
    map_data_layered,
    map_data_simple,
    map_query,
    query_message_size,
    reduce_layered,
    reduce_simple,
)

__version__ = "0.1.0"

__all__ = [
    "BucketId",
    "CSV_COLUMNS",
    "ClusterConfig",
    "DEFAULT_EPSILON",
    "Dataset",
    "DataRecord",
    "DimensionError",
    "FormatError",
    "GroundTruth",
    "InnerHashFamily",
    "IntegrityError",
    "KeyValueMessage",
    "LshParams",
    "MachineKey",
    "MachineLoad",
    "MatchResult",
    "OffsetSet",
    "OuterHash",
    "ParameterError",
    "ProbePlan",
    "QueryRecord",
    "RunMetrics",
    "Scheme",
    "ShuffleLedger",
    "TuneStep",
    "assign_machine",
    "brute_force_near",
    "build_probe_plan",
    "collision_probability",
    "composite_key",
    "compute_recalls",
    "data_message_size",
    "default_offset_count",
    "distance_threshold",
    "execute_run",
    "generate_planted",
    "ground_truth",
    "ground_truth_cache_key",
    "inverse_collision_probability",
    "load_or_compute_ground_truth",
    "load_summary",
    "map_data_layered",
    "map_data_simple",
    "map_query",
    "nominal_collision_probs",
    "planted_parent_ids",
    "probe_buckets",
    "probe_outer_keys",
    "query_message_size",
    "read_ground_truth",
    "read_vectors",
    "reduce_layered",
    "reduce_simple",
    "run_job",
    "run_sweep",
    "sample_inner_family",
    "sample_offsets",
    "sample_outer_hash",
    "suggest_concat_length",
    "tune_outer_width",
    "write_ground_truth",
    "write_metrics_csv",
    "write_results_csv",
    "write_tune_csv",
]
