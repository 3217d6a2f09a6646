"""Generation-quality metric battery over hypothesis/reference pairs.

All metrics return fractions in [0, 1] (the CLI multiplies by 100 for
reporting); the task-oriented combined score is the one unbounded
exception. Tokenization defaults to lowercase whitespace words, shared
with the overlap filter. Every operation is pure, and corpus statistics
reduce associatively over pairs.

Implementation notes pinned here because callers depend on them:

* ``bleu`` smoothing ``method7`` follows the published sentence-smoothing
  recipe (zero-count precisions lifted by (n-1) + k/ln(hyp_len) with k=5,
  then a three-way neighbor average seeded with p1+1). The neighbor
  average can push near-perfect hypotheses above 1, so the final score is
  capped at 1.0. Empty hypotheses contribute zero counts in corpus mode
  and score 0 in sentence mode.
* ``meteor_basic`` aligns unigrams by exact match, then by stem match
  (suffix-stripping stemmer), greedily left to right. With alpha=0.9,
  gamma=0.5, beta=3, the fragmentation penalty is gamma * ((chunks - 1) /
  matches) ** beta: a single contiguous alignment carries no penalty, so
  identical strings score exactly 1.0. No synonym stage is performed; the
  evaluation report states this simplification.
* ``rouge_n``/``rouge_l`` use best-reference F1 averaged over pairs, with
  stemming off by default.
"""

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ValidationError
from .stem import stem
from .tokens import Tokenizer, simple_tokens

METEOR_ALPHA = 0.9
METEOR_GAMMA = 0.5
METEOR_BETA = 3.0
SMOOTHING_K = 5.0

METEOR_NOTE = (
    "meteor_basic: exact+stem unigram alignment, no synonym stage; "
    "fragmentation counts alignment breaks, so a single contiguous match is unpenalized"
)


@dataclass(frozen=True)
class EvalPair:
    hypothesis: str
    references: tuple[str, ...]

    def __post_init__(self):
        if not self.references:
            raise ValidationError("every pair needs at least one reference")


def _check_pairs(pairs: Sequence[EvalPair]):
    if not pairs:
        raise ValidationError("need at least one hypothesis/reference pair")


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _clipped_matches(hyp_tokens: list[str], ref_token_lists: list[list[str]], n: int) -> tuple[int, int]:
    """(clipped match count, hypothesis n-gram count) for one pair at order n."""
    hyp_counts = _ngram_counts(hyp_tokens, n)
    total = sum(hyp_counts.values())
    if total == 0:
        return 0, 0
    max_ref = Counter()
    for ref_tokens in ref_token_lists:
        for gram, count in _ngram_counts(ref_tokens, n).items():
            if count > max_ref[gram]:
                max_ref[gram] = count
    clipped = sum(min(count, max_ref[gram]) for gram, count in hyp_counts.items())
    return clipped, total


def _closest_ref_length(hyp_len: int, ref_lens: list[int]) -> int:
    return min(ref_lens, key=lambda rl: (abs(rl - hyp_len), rl))


def _smooth_method7(precisions: list[tuple[int, int]], p_next: float, hyp_len: int) -> list[float]:
    """Lift zero counts, then average each order with its neighbors."""
    lifted = []
    for i, (num, den) in enumerate(precisions):
        if num == 0 and den > 0 and hyp_len > 1:
            lifted.append((i + SMOOTHING_K / math.log(hyp_len)) / den)
        else:
            lifted.append(num / den if den > 0 else 0.0)
    smoothed = []
    previous = lifted[0] + 1.0
    neighbors = lifted + [p_next]
    for i, value in enumerate(lifted):
        current = (previous + value + neighbors[i + 1]) / 3.0
        smoothed.append(current)
        previous = current
    return smoothed


def _geometric_mean_score(p_n: list[float], bp: float) -> float:
    if any(p <= 0.0 for p in p_n):
        return 0.0
    log_sum = sum(math.log(p) for p in p_n) / len(p_n)
    return bp * math.exp(log_sum)


def bleu(
    pairs: Sequence[EvalPair],
    max_n: int = 4,
    mode: str = "corpus",
    smoothing: str = "none",
    tokenizer: Tokenizer = simple_tokens,
) -> float:
    """Geometric mean of clipped n-gram precisions times a brevity penalty.

    ``corpus`` mode pools counts over all pairs; ``sentence`` mode scores
    each pair and averages. ``smoothing`` is ``none`` or ``method7``.
    """
    _check_pairs(pairs)
    if max_n < 1:
        raise ValidationError(f"max_n must be >= 1, got {max_n}")
    if mode not in ("corpus", "sentence"):
        raise ValidationError(f"mode must be 'corpus' or 'sentence', got {mode!r}")
    if smoothing not in ("none", "method7"):
        raise ValidationError(f"smoothing must be 'none' or 'method7', got {smoothing!r}")

    tokenized = [
        (tokenizer(pair.hypothesis), [tokenizer(ref) for ref in pair.references]) for pair in pairs
    ]

    if mode == "sentence":
        return sum(_sentence_bleu(h, r, max_n, smoothing) for h, r in tokenized) / len(tokenized)

    clipped = [0] * (max_n + 1)
    totals = [0] * (max_n + 1)
    hyp_total = 0
    ref_total = 0
    for hyp_tokens, ref_lists in tokenized:
        hyp_total += len(hyp_tokens)
        ref_total += _closest_ref_length(len(hyp_tokens), [len(r) for r in ref_lists])
        for n in range(1, max_n + 2):
            c, t = _clipped_matches(hyp_tokens, ref_lists, n)
            clipped[n - 1] += c
            totals[n - 1] += t

    bp = 1.0 if hyp_total > ref_total else (0.0 if hyp_total == 0 else math.exp(1.0 - ref_total / hyp_total))
    precisions = list(zip(clipped[:max_n], totals[:max_n]))
    if smoothing == "method7":
        p_next = clipped[max_n] / totals[max_n] if totals[max_n] > 0 else 0.0
        p_n = _smooth_method7(precisions, p_next, hyp_total)
        return min(1.0, _geometric_mean_score(p_n, bp))
    p_n = [num / den if den > 0 else 0.0 for num, den in precisions]
    return _geometric_mean_score(p_n, bp)


def _sentence_bleu(hyp_tokens: list[str], ref_lists: list[list[str]], max_n: int, smoothing: str) -> float:
    if not hyp_tokens:
        return 0.0
    hyp_len = len(hyp_tokens)
    ref_len = _closest_ref_length(hyp_len, [len(r) for r in ref_lists])
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    precisions = [_clipped_matches(hyp_tokens, ref_lists, n) for n in range(1, max_n + 1)]
    if smoothing == "method7":
        c_next, t_next = _clipped_matches(hyp_tokens, ref_lists, max_n + 1)
        p_next = c_next / t_next if t_next > 0 else 0.0
        p_n = _smooth_method7(precisions, p_next, hyp_len)
        return min(1.0, _geometric_mean_score(p_n, bp))
    p_n = [num / den if den > 0 else 0.0 for num, den in precisions]
    return _geometric_mean_score(p_n, bp)


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _maybe_stem(tokens: list[str], use_stem: bool) -> list[str]:
    return [stem(t) for t in tokens] if use_stem else tokens


def rouge_n(
    pairs: Sequence[EvalPair],
    n: int,
    use_stem: bool = False,
    tokenizer: Tokenizer = simple_tokens,
) -> float:
    """Mean best-reference F1 of order-n overlap."""
    _check_pairs(pairs)
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    total = 0.0
    for pair in pairs:
        hyp = _maybe_stem(tokenizer(pair.hypothesis), use_stem)
        hyp_counts = _ngram_counts(hyp, n)
        hyp_total = sum(hyp_counts.values())
        best = 0.0
        for ref in pair.references:
            ref_counts = _ngram_counts(_maybe_stem(tokenizer(ref), use_stem), n)
            ref_total = sum(ref_counts.values())
            if hyp_total == 0 or ref_total == 0:
                continue
            overlap = sum((hyp_counts & ref_counts).values())
            best = max(best, _f1(overlap / hyp_total, overlap / ref_total))
        total += best
    return total / len(pairs)


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l(
    pairs: Sequence[EvalPair],
    use_stem: bool = False,
    tokenizer: Tokenizer = simple_tokens,
) -> float:
    """Mean best-reference F1 of longest-common-subsequence overlap."""
    _check_pairs(pairs)
    total = 0.0
    for pair in pairs:
        hyp = _maybe_stem(tokenizer(pair.hypothesis), use_stem)
        best = 0.0
        for ref in pair.references:
            ref_tokens = _maybe_stem(tokenizer(ref), use_stem)
            if not hyp or not ref_tokens:
                continue
            lcs = _lcs_length(hyp, ref_tokens)
            best = max(best, _f1(lcs / len(hyp), lcs / len(ref_tokens)))
        total += best
    return total / len(pairs)


def _align(hyp: list[str], ref: list[str]) -> list[tuple[int, int]]:
    """Greedy leftmost unigram alignment: exact stage, then stem stage."""
    hyp_used = [False] * len(hyp)
    ref_used = [False] * len(ref)
    alignment = []
    for surface in (False, True):
        hyp_keys = [stem(t) for t in hyp] if surface else hyp
        ref_keys = [stem(t) for t in ref] if surface else ref
        for i, key in enumerate(hyp_keys):
            if hyp_used[i]:
                continue
            for j, ref_key in enumerate(ref_keys):
                if not ref_used[j] and key == ref_key:
                    hyp_used[i] = True
                    ref_used[j] = True
                    alignment.append((i, j))
                    break
    return sorted(alignment)


def _chunk_count(alignment: list[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in alignment:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def _meteor_pair(hyp: list[str], ref: list[str]) -> float:
    alignment = _align(hyp, ref)
    matches = len(alignment)
    if matches == 0:
        return 0.0
    precision = matches / len(hyp)
    recall = matches / len(ref)
    f_mean = precision * recall / (METEOR_ALPHA * precision + (1.0 - METEOR_ALPHA) * recall)
    fragmentation = (_chunk_count(alignment) - 1) / matches
    penalty = METEOR_GAMMA * fragmentation**METEOR_BETA
    return f_mean * (1.0 - penalty)


def meteor_basic(pairs: Sequence[EvalPair], tokenizer: Tokenizer = simple_tokens) -> float:
    """Mean best-reference alignment score (see module notes for the recipe)."""
    _check_pairs(pairs)
    total = 0.0
    for pair in pairs:
        hyp = tokenizer(pair.hypothesis)
        if not hyp:
            continue
        refs = [tokenizer(r) for r in pair.references]
        total += max((_meteor_pair(hyp, ref) for ref in refs if ref), default=0.0)
    return total / len(pairs)


def distinct_n(hypotheses: Sequence[str], n: int, tokenizer: Tokenizer = simple_tokens) -> float:
    """Distinct order-n grams across all hypotheses over total grams; 0 if none."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    seen = set()
    total = 0
    for text in hypotheses:
        tokens = tokenizer(text)
        for i in range(len(tokens) - n + 1):
            seen.add(tuple(tokens[i : i + n]))
            total += 1
    return len(seen) / total if total else 0.0


_ARTICLES = frozenset({"a", "an", "the"})
_PUNCTUATION = frozenset("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation, drop articles, collapse whitespace."""
    lowered = text.lower()
    no_punct = "".join(ch for ch in lowered if ch not in _PUNCTUATION)
    no_articles = " ".join(tok for tok in no_punct.split() if tok not in _ARTICLES)
    return no_articles


def _answer_f1(hyp: str, ref: str) -> float:
    hyp_tokens = normalize_answer(hyp).split()
    ref_tokens = normalize_answer(ref).split()
    if not hyp_tokens or not ref_tokens:
        return float(hyp_tokens == ref_tokens)
    common = Counter(hyp_tokens) & Counter(ref_tokens)
    same = sum(common.values())
    if same == 0:
        return 0.0
    return _f1(same / len(hyp_tokens), same / len(ref_tokens))


def squad_em_f1(pairs: Sequence[EvalPair]) -> tuple[float, float]:
    """(exact match, macro F1) under answer normalization, best reference."""
    _check_pairs(pairs)
    em_total = 0.0
    f1_total = 0.0
    for pair in pairs:
        normalized_hyp = normalize_answer(pair.hypothesis)
        em_total += max(float(normalized_hyp == normalize_answer(ref)) for ref in pair.references)
        f1_total += max(_answer_f1(pair.hypothesis, ref) for ref in pair.references)
    return em_total / len(pairs), f1_total / len(pairs)


def combined_score(bleu_x100: float, inform: float, success: float) -> float:
    """Task-oriented dialogue aggregate: (inform + success) / 2 + BLEU(x100)."""
    if bleu_x100 < 0 or inform < 0 or success < 0:
        raise ValidationError("combined score inputs must be non-negative")
    return (inform + success) * 0.5 + bleu_x100


@dataclass
class EvalReport:
    scores: dict[str, float]
    count: int
    per_example: dict[str, list[float]] | None = None
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out: dict = {
            "scores": {k: round(v, 2) for k, v in sorted(self.scores.items())},
            "count": self.count,
        }
        if self.notes:
            out["notes"] = list(self.notes)
        if self.per_example is not None:
            out["per_example"] = {k: v for k, v in sorted(self.per_example.items())}
        return out
