import json
import random

import pytest
import torch

from prompt_trainer.data import StreamExample, Vocab
from prompt_trainer.geometry import ModelGeometry


def toy_geometry(vocab_size=40, **overrides) -> ModelGeometry:
    base = dict(layers=2, d_model=32, heads=4, vocab_size=vocab_size, max_len=64)
    base.update(overrides)
    return ModelGeometry(**base)


def copy_task_stream(task: str, vocab: list[str], count: int, seed: int) -> list[StreamExample]:
    """Inputs are short token strings; the target copies the payload."""
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        body = " ".join(rng.choice(vocab) for _ in range(rng.randint(3, 6)))
        out.append(StreamExample(task=task, dataset=task, input=f"{task}: {body}", output=body))
    return out


def write_stream(path, examples):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {
                        "task": ex.task,
                        "dataset": ex.dataset,
                        "split": "train",
                        "instruction": ex.input.split(":")[0] + ":",
                        "input": ex.input,
                        "output": ex.output,
                    }
                )
                + "\n"
            )
    return path


@pytest.fixture(autouse=True)
def fixed_torch_seed():
    torch.manual_seed(1234)


@pytest.fixture
def small_vocab():
    return [f"tok{i}" for i in range(12)]
