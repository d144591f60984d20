"""Causal additive tree learning.

Learns the directed-tree structure of additive-noise models by exact
minimization of Gaussian or entropy scores over all spanning arborescences,
and quantifies uncertainty through simultaneous edge-weight confidence
intervals, substructure hypothesis tests, and identifiability-gap
diagnostics. A simulation harness generates ground-truth models and
benchmarks recovery.
"""

from .arborescence import (
    DirectedTree,
    EdgeConstraintSet,
    InfeasibleConstraintError,
    brute_force_arborescence,
    min_arborescence,
    second_best_trees,
    tree_from_json,
    tree_to_dot,
    tree_to_json,
)
from .data import (
    CsvParseError,
    Dataset,
    DegenerateDataError,
    SplitDataset,
    column_variance,
    load_csv,
    save_csv,
    split,
    standardize,
)
from .entropy import DegenerateSampleError, EntropyConfig, entropy_knn, mutual_information
from .gap import GapReport, bivariate_gap, bivariate_gap_test, edge_reversal_gaps, empirical_gap
from .inference import (
    ConfidenceReport,
    MomentSummaries,
    TestReport,
    confidence_intervals,
    moment_summaries,
    test_many,
    test_substructure,
)
from .simulate import (
    BenchmarkGrid,
    Metrics,
    ScmSpec,
    ancestor_metrics,
    bivariate_spec,
    chain3_spec,
    gen_dag_single_rooted,
    gen_tree_type1,
    gen_tree_type2,
    preset_spec,
    random_scm,
    run_benchmark,
    sample_causal_function,
    sample_noise,
    sample_scm,
    shd,
)
from .smoother import RegressionFit, SmootherConfig, fit, predict, select_tuning
from .weights import WeightMatrix, entropy_weight, gaussian_weight, weight_matrix

__version__ = "0.1.0"
