"""Corpus engineering for multi-task text-to-text generation.

Converts heterogeneous generation datasets into one instruction-prefixed
text-to-text format, filters pre-training data that overlaps evaluation
sets, emits temperature-scaled multi-task mixtures, and scores generated
text with the usual n-gram metric battery.
"""

__version__ = "0.1.0"

from .model import (
    Manifest,
    RawRecord,
    TaskFamily,
    UnifiedExample,
    load_manifest,
    validate_example,
)
from .unify import InstructionTable, SeparatorConfig, unify_record

__all__ = [
    "Manifest",
    "RawRecord",
    "TaskFamily",
    "UnifiedExample",
    "load_manifest",
    "validate_example",
    "InstructionTable",
    "SeparatorConfig",
    "unify_record",
    "__version__",
]
