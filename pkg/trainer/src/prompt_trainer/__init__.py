"""Toy-scale encoder-decoder with layer-wise prefix prompts.

Consumes the unified text-to-text JSONL stream; trains in two stages
(full backbone on the multi-task mixture, then frozen-backbone prompts
per task family) and decodes with constrained beam search or seeded
nucleus sampling.
"""

__version__ = "0.1.0"

from .geometry import ModelGeometry, PrefixConfig, count_prompt_params
from .generation import GenConfig, generate
from .training import TrainConfig, train_stage1, train_stage2

__all__ = [
    "ModelGeometry",
    "PrefixConfig",
    "count_prompt_params",
    "GenConfig",
    "generate",
    "TrainConfig",
    "train_stage1",
    "train_stage2",
    "__version__",
]
