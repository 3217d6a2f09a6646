"""Unified-stream ingestion: JSONL records, a word vocabulary, id batches."""

import json
from dataclasses import dataclass

import torch

PAD, UNK, BOS, EOS = 0, 1, 2, 3
SPECIALS = ("<pad>", "<unk>", "<bos>", "<eos>")

REQUIRED_KEYS = {"task", "dataset", "split", "instruction", "input", "output"}


@dataclass(frozen=True)
class StreamExample:
    task: str
    dataset: str
    input: str
    output: str


def read_stream(path: str, task: str | None = None) -> list[StreamExample]:
    """Load unified JSONL examples, optionally filtered to one task family."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            missing = REQUIRED_KEYS - obj.keys()
            if missing:
                raise ValueError(f"{path}:{line_no}: missing keys {sorted(missing)}")
            if task is not None and obj["task"] != task:
                continue
            out.append(StreamExample(obj["task"], obj["dataset"], obj["input"], obj["output"]))
    return out


class Vocab:
    """Whitespace-token vocabulary with fixed special ids."""

    def __init__(self, tokens: list[str]):
        self.tokens = list(SPECIALS) + tokens
        self.index = {tok: i for i, tok in enumerate(self.tokens)}

    @classmethod
    def build(cls, examples: list[StreamExample]) -> "Vocab":
        seen = set()
        for ex in examples:
            seen.update(ex.input.split())
            seen.update(ex.output.split())
        return cls(sorted(seen))

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, text: str, max_len: int) -> list[int]:
        return [self.index.get(tok, UNK) for tok in text.split()][:max_len]

    def decode(self, ids) -> str:
        words = []
        for i in ids:
            i = int(i)
            if i in (PAD, BOS):
                continue
            if i == EOS:
                break
            words.append(self.tokens[i] if i < len(self.tokens) else SPECIALS[UNK])
        return " ".join(words)


@dataclass
class Batch:
    src: torch.Tensor        # (B, S) padded ids
    src_mask: torch.Tensor   # (B, S) bool, True = real token
    tgt_in: torch.Tensor     # (B, T) bos + output ids
    tgt_out: torch.Tensor    # (B, T) output ids + eos
    tgt_mask: torch.Tensor   # (B, T) bool over tgt_out


def _pad(rows: list[list[int]]) -> torch.Tensor:
    width = max(len(r) for r in rows)
    out = torch.full((len(rows), width), PAD, dtype=torch.long)
    for i, row in enumerate(rows):
        out[i, : len(row)] = torch.tensor(row, dtype=torch.long)
    return out


def make_batch(examples: list[StreamExample], vocab: Vocab, max_len: int) -> Batch:
    if not examples:
        raise ValueError("cannot build an empty batch")
    src_ids = [vocab.encode(ex.input, max_len) for ex in examples]
    if any(not ids for ids in src_ids):
        raise ValueError("example with empty input text")
    src = _pad(src_ids)
    out_ids = [vocab.encode(ex.output, max_len - 1) for ex in examples]
    tgt_in = _pad([[BOS] + ids for ids in out_ids])
    tgt_out = _pad([ids + [EOS] for ids in out_ids])
    return Batch(
        src=src,
        src_mask=src != PAD,
        tgt_in=tgt_in,
        tgt_out=tgt_out,
        tgt_mask=tgt_out != PAD,
    )


def batches(examples: list[StreamExample], vocab: Vocab, max_len: int, batch_size: int):
    """Cycle the stream in order, yielding fixed-size batches forever."""
    if not examples:
        raise ValueError("empty stream")
    start = 0
    while True:
        chunk = [examples[(start + i) % len(examples)] for i in range(batch_size)]
        yield make_batch(chunk, vocab, max_len)
        start = (start + batch_size) % len(examples)
