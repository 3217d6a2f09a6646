import random

import pytest

from mvpforge.model import TaskFamily, UnifiedExample


def make_example(
    input_text: str,
    output: str = "out",
    dataset: str = "ds",
    split: str = "train",
    task: TaskFamily = TaskFamily.SUMMARIZATION,
    instruction: str = "Summarize:",
) -> UnifiedExample:
    return UnifiedExample(
        task=task,
        dataset=dataset,
        split=split,
        instruction=instruction,
        input=f"{instruction} {input_text}",
        output=output,
    )


def random_sentence(rng: random.Random, vocab: list[str], min_len: int = 1, max_len: int = 15) -> str:
    return " ".join(rng.choice(vocab) for _ in range(rng.randint(min_len, max_len)))


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240817)
