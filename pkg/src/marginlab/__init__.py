"""Large-margin cosine losses on hypersphere embeddings.

Trainable losses (softmax / nsl / lmcl) over a tape-based autodiff core,
the geometric theory behind their scale and margin hyperparameters, a
deterministic toy training harness, and cosine-similarity evaluation
metrics. The ``marginlab`` CLI drives the experiments and emits plot-ready
CSV/JSON artifacts.
"""

from .errors import (ConfigError, CsvFormatError, DegenerateVectorError,
                     DomainError, InfeasibleConfigurationError,
                     MarginlabError, ProtocolError, ShapeError,
                     TrainingDivergedError)
from .geometry import (BoundKind, BoundReport, MarginScope, OracleEvidence,
                       RegionGrid, RegionLabel, WeightConfig, bound_report,
                       decision_regions, lmcl_margin_width,
                       margin_band_width, max_min_angle_dot,
                       min_center_posterior, m_scope, s_lower_bound,
                       simplex_weights, verify_weight_inequalities)
from .losses import (Batch, ClassWeights, LossKind, LossSpec, evaluate_loss,
                     lmcl_loss, loss_gradients, nsl_loss, softmax_loss)
from .metrics import (GalleryProbe, PairSet, cosine_score,
                      rank1_identification, sample_pairs, tar_at_far,
                      verification_accuracy)
from .tensor import Graph, NodeId, as_matrix, one_hot
from .training import (AngularStats, MlpModel, SyntheticDataset, TrainConfig,
                       TrainRun, angular_stats, extract_features,
                       generate_blobs, load_model, save_model, train)

__version__ = "0.1.0"

__all__ = [
    "AngularStats", "Batch", "BoundKind", "BoundReport", "ClassWeights",
    "ConfigError", "CsvFormatError", "DegenerateVectorError", "DomainError",
    "GalleryProbe", "Graph", "InfeasibleConfigurationError", "LossKind",
    "LossSpec", "MarginScope", "MarginlabError", "MlpModel", "NodeId",
    "OracleEvidence", "PairSet", "ProtocolError", "RegionGrid",
    "RegionLabel", "ShapeError", "SyntheticDataset", "TrainConfig",
    "TrainRun", "TrainingDivergedError", "WeightConfig", "angular_stats",
    "as_matrix", "bound_report", "cosine_score", "decision_regions",
    "evaluate_loss", "extract_features", "generate_blobs",
    "lmcl_loss", "lmcl_margin_width", "load_model", "loss_gradients",
    "m_scope", "margin_band_width", "max_min_angle_dot",
    "min_center_posterior", "nsl_loss", "one_hot", "rank1_identification",
    "s_lower_bound", "sample_pairs", "save_model", "simplex_weights",
    "softmax_loss", "tar_at_far", "train", "verification_accuracy",
    "verify_weight_inequalities",
]
