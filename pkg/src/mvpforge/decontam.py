"""Removes training examples that share n-gram overlap with evaluation sets.

For each evaluation set, the window order n is the nearest-rank 5th
percentile of its example lengths in words, clamped to [1, 13]. A training
example is dropped when any order-n window of its input+output text hashes
into that set's index. Windows are stored as 64-bit digests; an exact
string-set mode exists for verification runs.

Index construction is a parallel reduce (indexes merge by set union);
filtering is embarrassingly parallel over shards against read-only
indexes, and reports merge associatively.
"""

import math
import struct
from dataclasses import dataclass, field
from hashlib import blake2b
from typing import Iterable, Iterator

from .errors import EmptyInputError, SchemaError, ValidationError
from .model import UnifiedExample
from .tokens import get_tokenizer

INDEX_MAGIC = b"NGIX"
INDEX_VERSION = 1
REMOVED_SAMPLE_CAP = 10


@dataclass(frozen=True)
class DecontamConfig:
    percentile: float = 5.0
    max_order: int = 13
    min_order: int = 1
    normalize: str = "simple"

    def __post_init__(self):
        if not (0 < self.percentile <= 100):
            raise ValidationError("percentile must be in (0, 100]")
        if not (1 <= self.min_order <= self.max_order):
            raise ValidationError("need 1 <= min_order <= max_order")


def tokenize_for_overlap(text: str, cfg: DecontamConfig = DecontamConfig()) -> list[str]:
    """Words used for overlap windows: lowercased, whitespace-split."""
    return get_tokenizer(cfg.normalize)(text)


def example_text(ex: UnifiedExample) -> str:
    """The overlap surface of an example: input and output, space-joined."""
    return f"{ex.input} {ex.output}"


def compute_order(eval_lengths: Iterable[int], cfg: DecontamConfig = DecontamConfig()) -> int:
    """Nearest-rank percentile of the lengths, clamped to the order bounds."""
    lengths = sorted(eval_lengths)
    if not lengths:
        raise EmptyInputError("no-eval-examples", "cannot compute window order from an empty evaluation set")
    rank = max(1, math.ceil(cfg.percentile / 100.0 * len(lengths)))
    order = lengths[rank - 1]
    return min(max(order, cfg.min_order), cfg.max_order)


def hash_gram(window: str) -> int:
    """Stable 64-bit digest of one window; independent of interpreter hashing."""
    return int.from_bytes(blake2b(window.encode("utf-8"), digest_size=8).digest(), "little")


def _windows(tokens: list[str], order: int) -> Iterator[str]:
    for i in range(len(tokens) - order + 1):
        yield " ".join(tokens[i : i + order])


@dataclass(frozen=True)
class NGramIndex:
    """All order-n windows of one evaluation set, as digests or raw strings."""

    order: int
    grams: frozenset
    source_dataset: str = ""
    exact: bool = False

    @property
    def gram_count(self) -> int:
        return len(self.grams)

    def contains_window(self, tokens: list[str]) -> bool:
        """True when any order-n window of ``tokens`` is in the index."""
        if len(tokens) < self.order:
            return False
        if self.exact:
            return any(w in self.grams for w in _windows(tokens, self.order))
        return any(hash_gram(w) in self.grams for w in _windows(tokens, self.order))

    def merge(self, other: "NGramIndex") -> "NGramIndex":
        if (self.order, self.exact) != (other.order, other.exact):
            raise ValidationError("cannot merge indexes with different order or mode")
        return NGramIndex(
            order=self.order,
            grams=self.grams | other.grams,
            source_dataset=self.source_dataset or other.source_dataset,
            exact=self.exact,
        )


def build_index(
    eval_examples: Iterable[UnifiedExample],
    cfg: DecontamConfig = DecontamConfig(),
    source_dataset: str = "",
    exact: bool = False,
) -> NGramIndex:
    """Index every order-n window of an evaluation set.

    The order is the percentile of this same stream's word lengths, so the
    stream is buffered as token lists; evaluation sets are the small side.
    """
    token_lists = [tokenize_for_overlap(example_text(ex), cfg) for ex in eval_examples]
    order = compute_order([len(t) for t in token_lists], cfg)
    grams = set()
    for tokens in token_lists:
        for window in _windows(tokens, order):
            grams.add(window if exact else hash_gram(window))
    return NGramIndex(order=order, grams=frozenset(grams), source_dataset=source_dataset, exact=exact)


def hit_sets(tokens: list[str], indexes: list[NGramIndex]) -> list[str]:
    """Names of every index containing a window of ``tokens``."""
    return [idx.source_dataset for idx in indexes if idx.contains_window(tokens)]


@dataclass
class FilterReport:
    examined: int = 0
    removed: int = 0
    hits: dict[str, int] = field(default_factory=dict)
    removed_sample: list[str] = field(default_factory=list)
    short_kept: int = 0
    orders: dict[str, int] = field(default_factory=dict)

    def record(self, example_id: str, hit: list[str], short: bool):
        self.examined += 1
        if hit:
            self.removed += 1
            for name in hit:
                self.hits[name] = self.hits.get(name, 0) + 1
            if len(self.removed_sample) < REMOVED_SAMPLE_CAP:
                self.removed_sample.append(example_id)
        elif short:
            self.short_kept += 1

    def merge(self, other: "FilterReport") -> "FilterReport":
        merged = FilterReport(
            examined=self.examined + other.examined,
            removed=self.removed + other.removed,
            hits=dict(self.hits),
            removed_sample=(self.removed_sample + other.removed_sample)[:REMOVED_SAMPLE_CAP],
            short_kept=self.short_kept + other.short_kept,
            orders={**self.orders, **other.orders},
        )
        for name, count in other.hits.items():
            merged.hits[name] = merged.hits.get(name, 0) + count
        return merged

    def to_dict(self) -> dict:
        return {
            "examined": self.examined,
            "removed": self.removed,
            "kept": self.examined - self.removed,
            "hits": dict(sorted(self.hits.items())),
            "orders": dict(sorted(self.orders.items())),
            "removed_sample": list(self.removed_sample),
            "short_kept": self.short_kept,
        }


def filter_corpus(
    train: Iterable[UnifiedExample],
    indexes: list[NGramIndex],
    cfg: DecontamConfig = DecontamConfig(),
) -> tuple[list[UnifiedExample], FilterReport]:
    """Drop every training example overlapping any index; keep input order.

    Examples shorter than every index order can never overlap; they are
    kept and counted in the report. Returns the kept examples and a report
    whose totals are consistent by construction.
    """
    report = FilterReport(orders={idx.source_dataset: idx.order for idx in indexes})
    min_order = min((idx.order for idx in indexes), default=0)
    kept = []
    for position, ex in enumerate(train):
        tokens = tokenize_for_overlap(example_text(ex), cfg)
        hit = hit_sets(tokens, indexes)
        report.record(f"{ex.dataset}:{position}", hit, short=bool(indexes) and len(tokens) < min_order)
        if not hit:
            kept.append(ex)
    return kept, report


def save_index(index: NGramIndex, path: str):
    """Binary layout: magic, version, order, gram count, sorted LE digests."""
    if index.exact:
        raise ValidationError("exact-mode indexes are in-memory only")
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(struct.pack("<IIQ", INDEX_VERSION, index.order, index.gram_count))
        for digest in sorted(index.grams):
            fh.write(struct.pack("<Q", digest))


def load_index(path: str, source_dataset: str = "") -> NGramIndex:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != INDEX_MAGIC:
            raise SchemaError(f"not an n-gram index file: bad magic {magic!r}")
        version, order, gram_count = struct.unpack("<IIQ", fh.read(16))
        if version != INDEX_VERSION:
            raise SchemaError(f"unsupported index version {version}")
        payload = fh.read()
    if len(payload) != gram_count * 8:
        raise SchemaError(f"index truncated: expected {gram_count} digests, found {len(payload) // 8}")
    grams = frozenset(struct.unpack(f"<{gram_count}Q", payload))
    if len(grams) != gram_count:
        raise SchemaError("index contains duplicate digests")
    return NGramIndex(order=order, grams=grams, source_dataset=source_dataset)
