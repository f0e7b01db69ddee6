"""Structured k-nearest-neighbour sequence labelling and classification.

A transition graph built from labelled training sequences stores training
elements on its vertices; new sequences are labelled by a Viterbi-style
search for the edge-respecting path minimizing the summed k-nearest-neighbour
distance at every position, and whole sequences are classified over a union
of per-class subgraphs mined by clustering.
"""

from .data import (
    SplitConfig,
    apply_context_window,
    generate_chunking_corpus,
    generate_synthetic,
    generate_tagged_text,
    generate_trajectories,
    read_conll,
    read_points,
    resample_trajectories,
    split_dataset,
    write_conll,
    write_points,
)
from .dataset import (
    Dataset,
    Element,
    FeatureKind,
    FeatureSpec,
    NameTable,
    Schema,
    Sequence,
    WindowConfig,
    dataset_digest,
)
from .decoder import (
    ClassifyResult,
    DecodeResult,
    Decoder,
    Trellis,
    brute_force_decode,
    classify_sequence,
    label_sequence,
)
from .harness import (
    ExperimentConfig,
    Report,
    evaluate_classification,
    evaluate_labelling,
    metric_name,
    parse_metric_spec,
    run_experiment,
    run_grid,
)
from .induction import (
    ClusterAssignment,
    ClusteringConfig,
    Subgraph,
    assemble_classifier,
    cluster_exemplars,
    induce_classifier,
    induce_structure,
)
from .metrics import (
    FittedMetric,
    MetricSpec,
    distance,
    fit_metric,
    information_gain,
    information_gain_ratio,
    mvdm_value_distance,
    n_dist,
)
from .model import (
    Model,
    Violation,
    build_model,
    load_model,
    load_model_with_metric,
    model_digest,
    save_model,
    validate_model,
    vertex_exemplars,
)

__version__ = "0.1.0"

__all__ = [
    "ClassifyResult",
    "ClusterAssignment",
    "ClusteringConfig",
    "Dataset",
    "DecodeResult",
    "Decoder",
    "Element",
    "ExperimentConfig",
    "FeatureKind",
    "FeatureSpec",
    "FittedMetric",
    "MetricSpec",
    "Model",
    "NameTable",
    "Report",
    "Schema",
    "Sequence",
    "SplitConfig",
    "Subgraph",
    "Trellis",
    "Violation",
    "WindowConfig",
    "apply_context_window",
    "assemble_classifier",
    "brute_force_decode",
    "build_model",
    "classify_sequence",
    "cluster_exemplars",
    "dataset_digest",
    "distance",
    "evaluate_classification",
    "evaluate_labelling",
    "fit_metric",
    "generate_chunking_corpus",
    "generate_synthetic",
    "generate_tagged_text",
    "generate_trajectories",
    "induce_classifier",
    "induce_structure",
    "information_gain",
    "information_gain_ratio",
    "label_sequence",
    "load_model",
    "load_model_with_metric",
    "metric_name",
    "model_digest",
    "mvdm_value_distance",
    "n_dist",
    "parse_metric_spec",
    "read_conll",
    "read_points",
    "resample_trajectories",
    "run_experiment",
    "run_grid",
    "save_model",
    "split_dataset",
    "validate_model",
    "vertex_exemplars",
    "write_conll",
    "write_points",
]
