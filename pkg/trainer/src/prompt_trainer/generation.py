"""Decoding: beam search with a no-repeat-trigram constraint, and seeded
top-p (nucleus) sampling."""

from dataclasses import dataclass

import torch

from .data import BOS, EOS, PAD, StreamExample, Vocab, make_batch


@dataclass(frozen=True)
class GenConfig:
    strategy: str = "beam"
    beam_width: int = 5
    no_repeat_ngram: int = 3
    top_p: float = 0.9
    temperature: float = 0.7
    max_new_tokens: int = 24
    seed: int = 42

    def __post_init__(self):
        if self.strategy not in ("beam", "nucleus"):
            raise ValueError("strategy must be 'beam' or 'nucleus'")
        if self.strategy == "beam" and (self.beam_width <= 0 or self.no_repeat_ngram <= 0):
            raise ValueError("beam needs positive beam_width and no_repeat_ngram")
        if self.strategy == "nucleus" and not (0.0 < self.top_p <= 1.0 and self.temperature > 0):
            raise ValueError("nucleus needs 0 < top_p <= 1 and temperature > 0")


def banned_continuations(tokens: list[int], n: int) -> set[int]:
    """Tokens that would complete an n-gram already present in ``tokens``."""
    if n <= 1:
        return set(tokens)
    if len(tokens) < n - 1:
        return set()
    prefix = tuple(tokens[-(n - 1) :])
    banned = set()
    for i in range(len(tokens) - n + 1):
        if tuple(tokens[i : i + n - 1]) == prefix:
            banned.add(tokens[i + n - 1])
    return banned


def contains_repeated_ngram(tokens: list[int], n: int) -> bool:
    grams = [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]
    return len(grams) != len(set(grams))


def sample_top_p(
    logits: torch.Tensor, top_p: float, temperature: float, generator: torch.Generator
) -> int:
    """One draw from the renormalized smallest prefix of the sorted
    distribution whose mass reaches top_p; p=1, T=1 is ancestral sampling."""
    probs = torch.softmax(logits / temperature, dim=-1)
    sorted_probs, order = torch.sort(probs, descending=True)
    cumulative = torch.cumsum(sorted_probs, dim=-1)
    crossed = cumulative >= top_p
    cutoff = int(torch.nonzero(crossed)[0]) + 1 if bool(crossed.any()) else probs.shape[-1]
    kept = sorted_probs[:cutoff] / sorted_probs[:cutoff].sum()
    choice = torch.multinomial(kept, 1, generator=generator)
    return int(order[choice])


def _decode_logits(model, prompts, memory, src_mask, tokens: list[int]) -> torch.Tensor:
    tgt = torch.tensor([tokens], dtype=torch.long)
    logits = model.decode(tgt, memory, src_mask, prompts=prompts)
    return logits[0, -1]


def _beam_search(model, prompts, memory, src_mask, gen: GenConfig) -> list[int]:
    beams = [([BOS], 0.0)]
    finished: list[tuple[list[int], float]] = []
    for _ in range(gen.max_new_tokens):
        candidates = []
        for tokens, score in beams:
            logits = _decode_logits(model, prompts, memory, src_mask, tokens)
            logits[PAD] = float("-inf")
            generated = tokens[1:]
            for banned in banned_continuations(generated, gen.no_repeat_ngram):
                logits[banned] = float("-inf")
            log_probs = torch.log_softmax(logits, dim=-1)
            top = torch.topk(log_probs, min(gen.beam_width, log_probs.shape[-1]))
            for logp, idx in zip(top.values.tolist(), top.indices.tolist()):
                if logp == float("-inf"):
                    continue
                candidates.append((tokens + [idx], score + logp))
        if not candidates:
            break
        candidates.sort(key=lambda c: (-c[1], c[0]))
        beams = []
        for tokens, score in candidates:
            if tokens[-1] == EOS:
                finished.append((tokens, score))
            else:
                beams.append((tokens, score))
            if len(beams) == gen.beam_width:
                break
        if not beams:
            break
    pool = finished if finished else beams
    best = max(pool, key=lambda c: c[1])
    return best[0][1:]


def _nucleus(model, prompts, memory, src_mask, gen: GenConfig, generator: torch.Generator) -> list[int]:
    tokens = [BOS]
    for _ in range(gen.max_new_tokens):
        logits = _decode_logits(model, prompts, memory, src_mask, tokens)
        logits[PAD] = float("-inf")
        choice = sample_top_p(logits, gen.top_p, gen.temperature, generator)
        tokens.append(choice)
        if choice == EOS:
            break
    return tokens[1:]


def generate(
    model,
    vocab: Vocab,
    inputs: list[str],
    gen: GenConfig,
    prompts: dict[str, torch.Tensor] | None = None,
) -> list[str]:
    """Decode one output per input text; nucleus runs are seeded and
    reproducible, beam outputs never contain a repeated no_repeat_ngram-gram."""
    if not inputs:
        raise ValueError("inputs must be non-empty")
    model.eval()
    generator = torch.Generator().manual_seed(gen.seed)
    outputs = []
    with torch.no_grad():
        for text in inputs:
            batch = make_batch(
                [StreamExample(task="", dataset="", input=text, output="")], vocab, model.geom.max_len
            )
            memory = model.encode(batch.src, batch.src_mask, prompts=prompts)
            if gen.strategy == "beam":
                ids = _beam_search(model, prompts, memory, batch.src_mask, gen)
            else:
                ids = _nucleus(model, prompts, memory, batch.src_mask, gen, generator)
            outputs.append(vocab.decode(ids))
    return outputs
