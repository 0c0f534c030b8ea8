from .losses import CombinedLoss, combined_loss, pearson_per_channel
from .spec import MappingKind, MappingSpec, TrainedMapping, count_parameters
from .ridge import fit_linear_lag
from .nets import build_module
from .train import OptimConfig, TrainingDiverged, train_mapping
from .forward import forward, random_mapping

__all__ = [
    "CombinedLoss", "combined_loss", "pearson_per_channel",
    "MappingKind", "MappingSpec", "TrainedMapping", "count_parameters",
    "fit_linear_lag", "build_module", "OptimConfig", "TrainingDiverged",
    "train_mapping", "forward", "random_mapping",
]
