"""Dataset generation, augmentation policies, experiments, and the CLI."""

from .augment import (
    AugmentationPolicy,
    augment_train,
    predict_tta,
    predict_tta_batch,
)
from .dataset import (
    DEFAULT_MASTER_SEED,
    DatasetManifest,
    generate_arrays,
    generate_dataset,
    generate_split,
    load_dataset,
    load_split,
    manifest_hash,
)
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    cross_validate,
    load_report,
    metrics,
    run_experiment,
    save_report,
    stratified_folds,
)

__all__ = [
    "AugmentationPolicy", "augment_train", "predict_tta", "predict_tta_batch",
    "DEFAULT_MASTER_SEED", "DatasetManifest", "generate_arrays", "generate_dataset",
    "generate_split", "load_dataset", "load_split", "manifest_hash",
    "ExperimentConfig", "ExperimentReport", "cross_validate", "load_report",
    "metrics", "run_experiment", "save_report", "stratified_folds",
]
