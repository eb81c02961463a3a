"""eegtext-bridge: runs a text-to-text model over eegtext datasets and emits
prediction files in the kit's JSONL schemas.

The bridge talks to the toolkit only through its published file formats
(vocab JSON, lexicon/tasks/corruption/predictions JSONL) and mirrors its CLI
conventions. A deterministic stub model keeps every mode testable offline;
the toy fine-tune entry point trains a miniature transformer, not anything
expected to reproduce published results.
"""

__version__ = "0.1.0"


class BridgeError(Exception):
    """Raised for malformed inputs or unusable configurations (exit code 3)."""
