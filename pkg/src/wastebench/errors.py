"""Exception taxonomy shared by every stage of the pipeline."""

from __future__ import annotations


class WastebenchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(WastebenchError):
    """Invalid option value: bad ratio, k out of range, negative gamma, ..."""


class ValidationError(WastebenchError):
    """Runtime data rejected by a contract check (NaN features, label range, dim mismatch)."""


class DecodeError(WastebenchError):
    """An image file could not be decoded."""


class DegenerateInput(WastebenchError):
    """Input too degenerate for the operation (empty mask, no valid pixel pairs)."""


class InitError(WastebenchError):
    """Segmentation initialisation rectangle unusable."""


class LayoutError(WastebenchError):
    """Handcrafted block set does not match the canonical layout."""


class StratificationError(WastebenchError):
    """A class is too small for the requested split or fold count."""


class TrainingError(WastebenchError):
    """Training cannot proceed or failed to converge."""


class FormatError(WastebenchError):
    """A serialized artifact (feature matrix, model, CSV) is malformed."""


class IoError(WastebenchError):
    """File system failure while reading or writing an artifact."""
