"""Adaptive yes/no identification with query groups, object groups, and persistent noise."""

from .builders import (
    BuildConfig,
    audit_greedy,
    build,
    build_gbs,
    build_gigqsa,
    build_gisa,
    build_gqsa,
    verify_tree_outcomes,
)
from .dataset import (
    Dataset,
    GROUP_ID,
    NoiseSpec,
    OBJECT_ID,
    dataset_from_document,
    load_dataset,
    load_dataset_csv,
    save_dataset,
    selection_probabilities,
)
from .errors import (
    BuildError,
    DuplicateRowsError,
    ExhaustedGroupError,
    InconsistentResponseError,
    InseparableGroupsError,
    ProblemFormatError,
    ProtocolError,
    QueryLearnError,
    TranscriptError,
    TreeDocumentError,
    ValidationError,
)
from .infomath import (
    NodePopulation,
    SplitStats,
    binary_entropy,
    check_impurity_equivalence,
    entropy,
    impurity_decrease,
    population,
    split_population,
    split_stats,
)
from .noise import (
    DilatedProblem,
    ImplicitDilation,
    NoiseIdentification,
    dilate_explicit,
    effective_budget,
    error_budget,
    identify_with_noise,
    simulate_errors,
)
from .session import (
    SessionState,
    Suggestion,
    answer,
    replay_transcript,
    start,
    suggest,
    top_outcomes,
    transcript,
    transcript_json,
)
from .synth import (
    GroupGenParams,
    QueryGroupGenParams,
    estimate_params,
    gen_group_dataset,
    gen_querygroup_dataset,
)
from .trees import (
    DecisionTree,
    TreeEvaluation,
    canonical_skeleton,
    check_impure_leaf_identity,
    evaluate_by_formula,
    evaluate_by_traversal,
    export_tree,
    import_tree,
    load_tree,
    save_tree,
    tree_to_json,
)

__version__ = "0.1.0"
