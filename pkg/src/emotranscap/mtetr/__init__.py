"""Multi-task emotion transition recognizer."""

from .checkpoint import load_checkpoint, save_checkpoint
from .decode import Smoothing, decode, format_segments, parse_segments
from .evaluate import RecognizerReport, evaluate_recognizer
from .loss import UncertaintyWeighting, uncertainty_floor, uncertainty_grad, uncertainty_loss
from .model import MTETR, ModelConfig, build_model, predict
from .synthetic import GaussianFeatureGenerator
from .targets import FrameTargets, boundary_frames, make_frame_targets
from .train import TrainConfig, TrainResult, train

__all__ = [
    "MTETR",
    "FrameTargets",
    "GaussianFeatureGenerator",
    "ModelConfig",
    "RecognizerReport",
    "Smoothing",
    "TrainConfig",
    "TrainResult",
    "UncertaintyWeighting",
    "boundary_frames",
    "build_model",
    "decode",
    "evaluate_recognizer",
    "format_segments",
    "load_checkpoint",
    "make_frame_targets",
    "parse_segments",
    "predict",
    "save_checkpoint",
    "train",
    "uncertainty_floor",
    "uncertainty_grad",
    "uncertainty_loss",
]
