"""Trajectory forecasting with learnable temporal-latency kernels.

The package decomposes a forecast into an affine reference motion plus
two learned spectral corrections (single-agent and social), each built
around a bounded kernel pair that spreads observed events over future
steps.  See README.md for the full tour.
"""

from .config import RunConfig, config_hash, load_config, model_hash
from .curves import LatencyCurve, average_curves, mean_curves, write_curves_csv
from .data import (
    Sample,
    Scene,
    SynthLatencySpec,
    Tracklet,
    inject_manual_neighbor,
    load_scene,
    load_split_manifest,
    make_windows,
    preprocess,
    synth_latency_scenes,
    untranslate,
    write_scene,
)
from .errors import (
    ConfigError,
    DomainError,
    InsufficientDataError,
    NumericError,
    ParseError,
    SequenceLengthError,
    ShapeError,
    TrainingError,
    ValidationError,
)
from .kernels import (
    ReverbKernelPair,
    bound_kernel,
    rank_report,
    reverberation_transform,
    sequential_similarity,
)
from .linear import LinearFit, linear_fit, residual
from .metrics import min_ade_fde, stat_ade_fde
from .model import ModelConfig, PredictionBatch, ReverbPredictor, best_of_k_loss
from .train import run_training
from .transforms import KINDS, Spectrum, TimeSeq, forward, inverse

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "InsufficientDataError",
    "KINDS",
    "LatencyCurve",
    "LinearFit",
    "ModelConfig",
    "NumericError",
    "ParseError",
    "PredictionBatch",
    "ReverbKernelPair",
    "ReverbPredictor",
    "RunConfig",
    "Sample",
    "Scene",
    "SequenceLengthError",
    "ShapeError",
    "Spectrum",
    "SynthLatencySpec",
    "TimeSeq",
    "Tracklet",
    "TrainingError",
    "ValidationError",
    "average_curves",
    "best_of_k_loss",
    "bound_kernel",
    "config_hash",
    "forward",
    "inject_manual_neighbor",
    "inverse",
    "linear_fit",
    "load_config",
    "load_scene",
    "load_split_manifest",
    "make_windows",
    "mean_curves",
    "min_ade_fde",
    "model_hash",
    "preprocess",
    "rank_report",
    "residual",
    "reverberation_transform",
    "run_training",
    "sequential_similarity",
    "stat_ade_fde",
    "synth_latency_scenes",
    "untranslate",
    "write_curves_csv",
    "write_scene",
]
