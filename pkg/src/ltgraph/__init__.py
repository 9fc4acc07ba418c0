"""Noisy-label training and label-transition repair for graph node classifiers."""

from .adjacency import NormalizedAdjacency, normalized_adjacency
from .classifier import (
    AdamState,
    ClassifierParams,
    TrainConfig,
    TrainResult,
    adam_step,
    backward,
    cross_entropy,
    forward,
    gcn_forward,
    init_params,
    load_checkpoint,
    predict_distribution,
    save_checkpoint,
    sgc_forward,
    sgc_propagate,
    softmax_rows,
    train,
)
from .data import (
    BundleError,
    GraphBundle,
    IndexOutOfRangeError,
    MissingFileError,
    NodeSplit,
    NonFiniteFeatureError,
    ShapeMismatchError,
    canonical_edges,
    load_bundle,
    load_split,
    save_bundle,
    save_split,
    split_nodes,
)
from .datasets import PRESETS, make_dataset
from .evaluate import (
    ScenarioReport,
    accuracy,
    confusion_matrix,
    log_heatmap_export,
    run_cell,
    run_pipeline,
)
from .inference import (
    InferenceConfig,
    InferenceResult,
    read_sample_counts,
    run_inference,
    write_inference_outputs,
    write_sample_counts,
)
from .perturb import NoiseSpec, PerturbSpec, inject_label_noise, simulate_perturbators
from .rng import stage_rng
from .sbm import synth_sbm
from .transition import (
    ConfusionCounts,
    DirichletPrior,
    gibbs_step_distribution,
    row_normalized,
    warmup_transition,
)

__version__ = "0.1.0"
