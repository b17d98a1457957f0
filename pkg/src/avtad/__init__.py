"""Audio-visual temporal action detection on a desk-scale numpy stack.

The package is a complete one-stage anchor-free detector: a small
reverse-mode autodiff core (`tensor`), per-modality pyramid encoders,
cross-modal fusion, per-timestep prediction heads, centricity-weighted
confidence scoring with Soft-NMS, tIoU/mAP evaluation, a deterministic
synthetic benchmark, and a config-driven command line.
"""

__version__ = "0.1.0"

from .config import RunConfig, config_hash, load_config
from .encoder import Encoder, EncoderConfig, FeaturePyramid, FeatureSequence
from .errors import (AvtadError, ConfigurationError, ContractError,
                     DataFormatError, NumericError, ShapeMismatchError)
from .evaluation import MeanApTable, mean_ap, tiou
from .model import Detector
from .params import ParamStore
from .pipeline import diagnostic_samples, evaluate_model
from .postprocess import (Detection, DetectionResult, PostConfig,
                          run_postprocess, soft_nms)
from .synthdata import (SynthConfig, SyntheticVideo, generate_dataset,
                        read_dataset, write_dataset)
from .targets import Segment, assign_positives, centricity_label
from .train import load_checkpoint, save_checkpoint, train

__all__ = [
    "AvtadError", "ConfigurationError", "ContractError", "DataFormatError",
    "Detection", "DetectionResult", "Detector", "Encoder", "EncoderConfig",
    "FeaturePyramid", "FeatureSequence", "MeanApTable", "NumericError",
    "ParamStore", "PostConfig", "RunConfig", "Segment", "ShapeMismatchError",
    "SynthConfig", "SyntheticVideo", "__version__", "assign_positives",
    "centricity_label", "config_hash", "diagnostic_samples",
    "evaluate_model", "generate_dataset", "load_checkpoint", "load_config",
    "mean_ap", "read_dataset", "run_postprocess", "save_checkpoint",
    "soft_nms", "tiou", "train", "write_dataset",
]
