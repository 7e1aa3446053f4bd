"""Waste-image classification benchmark: segmentation, handcrafted and
ingested deep features, classical classifiers, selection, and evaluation."""

from . import (
    bench,
    classifiers,
    dataset,
    deepfeat,
    features,
    image,
    metrics,
    segmentation,
    selection,
    synth,
)
from .errors import (
    ConfigError,
    DecodeError,
    DegenerateInput,
    FormatError,
    InitError,
    IoError,
    LayoutError,
    StratificationError,
    TrainingError,
    ValidationError,
    WastebenchError,
)

__version__ = "0.1.0"

__all__ = [
    "bench",
    "classifiers",
    "dataset",
    "deepfeat",
    "features",
    "image",
    "metrics",
    "segmentation",
    "selection",
    "synth",
    "WastebenchError",
    "ConfigError",
    "DecodeError",
    "DegenerateInput",
    "FormatError",
    "InitError",
    "IoError",
    "LayoutError",
    "StratificationError",
    "TrainingError",
    "ValidationError",
    "__version__",
]
