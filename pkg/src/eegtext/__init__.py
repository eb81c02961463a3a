"""eegtext: corpus engineering and evaluation toolkit for clinical EEG report text."""

__version__ = "0.1.0"


class DataError(Exception):
    """Raised for malformed input data or schema violations (CLI exit code 3)."""
