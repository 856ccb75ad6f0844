"""Ensembling strategies for precomputed language-model outputs.

Three strategies over a shared file format: simplex-weighted probability
fusion, an embedding-concatenation classifier, and a knowledge-similarity
reward loop steering that classifier's training — plus exact significance
tests and deterministic synthetic scenarios.
"""

from .classifier import (
    EpochStats,
    SmallClassifier,
    TrainConfig,
    TrainingDivergedError,
    TrainResult,
    load_classifier,
    predict_classifier,
    save_classifier,
    train_classifier,
)
from .data import (
    AlignmentError,
    EmbeddingMatrix,
    EnsembleInput,
    FormatError,
    KnowledgePair,
    LabeledDataset,
    ProbMatrix,
    ValidationIssue,
    concat_embeddings,
    holdout_split,
    load_manifest,
    scan_manifest,
    validate_alignment,
    write_input,
)
from .deep import (
    Beta,
    DeepResult,
    DeepTrainConfig,
    RewardWeights,
    RoundStats,
    align_embedding,
    cosine_sim,
    fit_alignment,
    knowledge_weights,
    optimize_beta,
    reward,
    train_deep,
)
from .evaluate import (
    ComparisonReport,
    ReportRow,
    accuracy,
    binomial_test_one_tailed,
    compare,
    format_table,
    mcnemar_test_one_tailed,
)
from .pca import PCAProjector, fit_pca
from .semi import SemiResult, run_semi
from .shallow import (
    ShallowResult,
    SimplexWeights,
    combine_probs,
    optimize_alpha,
    predict,
    zero_one_loss,
)
from .synth import SCENARIO_NAMES, Scenario, build_scenario, generate, preset

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "Beta",
    "ComparisonReport",
    "DeepResult",
    "DeepTrainConfig",
    "EmbeddingMatrix",
    "EnsembleInput",
    "EpochStats",
    "FormatError",
    "KnowledgePair",
    "LabeledDataset",
    "PCAProjector",
    "ProbMatrix",
    "ReportRow",
    "RewardWeights",
    "RoundStats",
    "SCENARIO_NAMES",
    "Scenario",
    "SemiResult",
    "ShallowResult",
    "SimplexWeights",
    "SmallClassifier",
    "TrainConfig",
    "TrainResult",
    "TrainingDivergedError",
    "ValidationIssue",
    "accuracy",
    "align_embedding",
    "binomial_test_one_tailed",
    "build_scenario",
    "combine_probs",
    "compare",
    "concat_embeddings",
    "cosine_sim",
    "fit_alignment",
    "fit_pca",
    "format_table",
    "generate",
    "holdout_split",
    "knowledge_weights",
    "load_classifier",
    "load_manifest",
    "mcnemar_test_one_tailed",
    "optimize_alpha",
    "optimize_beta",
    "predict",
    "predict_classifier",
    "preset",
    "reward",
    "run_semi",
    "save_classifier",
    "scan_manifest",
    "train_classifier",
    "train_deep",
    "validate_alignment",
    "write_input",
    "zero_one_loss",
]
