"""Multi-modal wound image classification: fused CNN backbones plus body-map locations."""

__version__ = "0.1.0"

from .bodymap import (
    BodyMapError,
    BodyMapRegion,
    BodyMapRegistry,
    decode_location,
    default_registry,
    encode_location,
    load_registry,
)
from .dataset import (
    CLASS_ORDER,
    DatasetError,
    DatasetManifest,
    FoldSet,
    SampleRecord,
    Source,
    SplitManifest,
    WoundClass,
    build_manifest,
    build_manifest_from_folders,
    make_folds,
    select_subset,
    split_dataset,
)
from .augment import (
    AugmentPolicy,
    ImageDecodeError,
    ImageTensor,
    augment_sample,
    identity_policy,
    load_image,
    preprocess,
)
from .model import (
    BackboneSpec,
    BackboneWeightsError,
    CheckpointError,
    FusionModel,
    ModelConfig,
    ModelConfigError,
    ModelContractError,
    build_backbone,
    build_model,
    default_backbones,
    load_checkpoint,
    save_checkpoint,
)
from .metrics import (
    ConfusionMatrix,
    MetricsError,
    MetricsReport,
    compute_metrics,
    roc_points,
)
from .training import (
    EvalResult,
    RunHistory,
    TrainConfig,
    TrainResult,
    TrainingDiverged,
    TrainingError,
    cross_entropy_loss,
    evaluate,
    train,
)
from .experiments import (
    CVResult,
    CellSkipped,
    GridCell,
    GridResult,
    run_cross_validation,
    run_experiment_grid,
    two_class_cells,
)
from .service import create_app, serve
from .synthetic import synthetic_image, write_synthetic_dataset

__all__ = [
    "__version__",
    "BodyMapError",
    "BodyMapRegion",
    "BodyMapRegistry",
    "decode_location",
    "default_registry",
    "encode_location",
    "load_registry",
    "CLASS_ORDER",
    "DatasetError",
    "DatasetManifest",
    "FoldSet",
    "SampleRecord",
    "Source",
    "SplitManifest",
    "WoundClass",
    "build_manifest",
    "build_manifest_from_folders",
    "make_folds",
    "select_subset",
    "split_dataset",
    "AugmentPolicy",
    "ImageDecodeError",
    "ImageTensor",
    "augment_sample",
    "identity_policy",
    "load_image",
    "preprocess",
    "BackboneSpec",
    "BackboneWeightsError",
    "CheckpointError",
    "FusionModel",
    "ModelConfig",
    "ModelConfigError",
    "ModelContractError",
    "build_backbone",
    "build_model",
    "default_backbones",
    "load_checkpoint",
    "save_checkpoint",
    "ConfusionMatrix",
    "MetricsError",
    "MetricsReport",
    "compute_metrics",
    "roc_points",
    "EvalResult",
    "RunHistory",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "TrainingError",
    "cross_entropy_loss",
    "evaluate",
    "train",
    "CVResult",
    "CellSkipped",
    "GridCell",
    "GridResult",
    "run_cross_validation",
    "run_experiment_grid",
    "two_class_cells",
    "create_app",
    "serve",
    "synthetic_image",
    "write_synthetic_dataset",
]
