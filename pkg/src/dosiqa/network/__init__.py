from .backbone import (
    DEFAULT_INPUT_SIZE,
    DEFAULT_STAGE_CHANNELS,
    DEFAULT_STAGE_SPATIAL,
    Backbone,
    StagedBackbone,
    TinyHybridBackbone,
    global_pool,
    load_external_backbone,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .model import (
    FeatureBundle,
    QualityHead,
    QualityNet,
    QualityPrediction,
    SlmConfig,
    extract_features,
    predict,
    readout,
)
from .slm import LongTermMemory, ShortTermMemory

__all__ = [
    "Backbone", "StagedBackbone", "TinyHybridBackbone", "global_pool", "load_external_backbone",
    "DEFAULT_INPUT_SIZE", "DEFAULT_STAGE_CHANNELS", "DEFAULT_STAGE_SPATIAL",
    "load_checkpoint", "save_checkpoint",
    "FeatureBundle", "QualityHead", "QualityNet", "QualityPrediction", "SlmConfig",
    "extract_features", "predict", "readout",
    "LongTermMemory", "ShortTermMemory",
]
