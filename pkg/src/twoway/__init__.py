"""Toolkit for sign prediction on link initiations in three-layer networks.

A network holds one shared set of users and three directed edge layers:
friendly-match initiations F (signed +1/-1), messages M, and regular
matches R (loser to winner). The package provides the data model, a
seeded synthetic generator with planted communities, map-equation
community detection, meta-path feature counting, learned sign
predictors, an evaluation harness, and a command line front end.
"""

__version__ = "0.1.0"

from .netcore import (
    F,
    M,
    R,
    LAYERS,
    MultilayerNetwork,
    MaskedView,
    RelationStep,
    SignedEdge,
    ParseError,
    SignConflictError,
    build_network,
    embeddedness,
    load_network,
    mask_f_edges,
    parse_layer_file,
)
from .community import (
    AugmentedNetwork,
    Partition,
    VisitRates,
    augment,
    cluster_layer,
    connected_component_partition,
    map_equation,
    minimize_codelength,
    visit_rates,
)
from .metapath import (
    ALL_SPECS,
    CB_SPECS,
    NB_SPECS,
    FeatureRow,
    MetaPathSpec,
    PairFeaturizer,
    count_paths,
    feature_row,
)
from .synthgen import GenConfig, GroundTruth, generate, preset
from .predictors import (
    LinearModel,
    MFModel,
    RandomSignPredictor,
    Standardizer,
    DegenerateTrainingError,
    fit_standardizer,
    nbsp_features,
    train_mf,
    train_svm,
)
from .evalharness import (
    EvalReport,
    ExperimentConfig,
    FoldPlan,
    UndefinedMetricError,
    activity_hamming,
    balanced_accuracy,
    common_edges,
    correlation_report,
    embeddedness_histogram,
    f_overlap_summary,
    kendall_tau_b,
    kfold_split,
    layer_degree_correlation,
    run_experiment,
    run_experiments,
)
