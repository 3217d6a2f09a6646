"""Word tokenizers shared by the overlap filter and the metric battery.

The default rule is deliberately simple: lowercase, then split on any
whitespace run. Every consumer that needs "words" (overlap windows,
n-gram metrics, corpus statistics) agrees on this rule unless the caller
opts into Treebank-style tokenization.
"""

import re
from typing import Callable

Tokenizer = Callable[[str], list[str]]


def simple_tokens(text: str) -> list[str]:
    """Lowercased whitespace tokens; empty text gives an empty list."""
    return text.lower().split()


_PTB_RULES = [
    (re.compile(r"([;@#$%&?!_\"“”‘’`\(\)\[\]\{\}<>])"), r" \1 "),
    (re.compile(r"([^\d]),"), r"\1 , "),
    (re.compile(r",([^\d])"), r" , \1"),
    (re.compile(r"(\w)\.(\s|$)"), r"\1 . \2"),
    (re.compile(r"([a-z])('s|'re|'ve|'ll|'d|'m|n't)\b", re.IGNORECASE), r"\1 \2"),
    (re.compile(r"--"), " -- "),
    (re.compile(r"\.\.\."), " ... "),
    (re.compile(r":(\s|$)"), r" : \1"),
]


def ptb_tokens(text: str) -> list[str]:
    """Treebank-style tokens: punctuation split off, contractions separated.

    A compact approximation of the classic rule set, sufficient for metric
    tokenization; not a drop-in for a full constituency-parser pipeline.
    """
    out = text
    for pattern, repl in _PTB_RULES:
        out = pattern.sub(repl, out)
    return out.lower().split()


_TOKENIZERS: dict[str, Tokenizer] = {
    "simple": simple_tokens,
    "ptb": ptb_tokens,
}


def get_tokenizer(name: str) -> Tokenizer:
    try:
        return _TOKENIZERS[name]
    except KeyError:
        raise ValueError(f"unknown tokenizer {name!r}; choose from {sorted(_TOKENIZERS)}") from None
