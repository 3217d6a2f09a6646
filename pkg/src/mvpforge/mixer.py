"""Temperature-scaled multi-task mixing with reproducible sampling.

Member i of a mixture is drawn with probability proportional to
min(size_i, cap) ** (1/T): T=1 reproduces size-proportional mixing and
larger T flattens the size disparity. Draws use a counter-based generator
keyed on (seed, position), so a stream can be regenerated or resumed from
any offset; within a member, examples are served by seeded shuffle without
replacement, reshuffling on exhaustion.

compute_rates is pure; one stream instance is single-consumer (concurrent
consumers must partition the (seed, position) space).
"""

import random
import struct
from bisect import bisect_right
from dataclasses import dataclass, replace
from hashlib import blake2b
from itertools import accumulate
from typing import Iterator, Mapping, Sequence, TypeVar

from .errors import EmptyInputError, ValidationError
from .model import TaskFamily

T = TypeVar("T")

RATE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Member:
    dataset_id: str
    family: TaskFamily
    size: int


@dataclass(frozen=True)
class MixtureSpec:
    members: tuple[Member, ...]
    temperature: float = 2.0
    size_cap: int | None = None
    seed: int = 42
    epoch_length: int = 1

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValidationError("temperature must be positive")
        if self.size_cap is not None and self.size_cap <= 0:
            raise ValidationError("size cap must be positive when given")
        if self.epoch_length <= 0:
            raise ValidationError("epoch length must be positive")
        for member in self.members:
            if member.size <= 0:
                raise ValidationError(f"member {member.dataset_id!r} has non-positive size")
        ids = [m.dataset_id for m in self.members]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate dataset ids in mixture")


@dataclass(frozen=True)
class SamplePlan:
    datasets: tuple[str, ...]
    rates: tuple[float, ...]
    seed: int
    epoch_length: int

    def __post_init__(self):
        if abs(sum(self.rates) - 1.0) > RATE_TOLERANCE:
            raise ValidationError("rates must sum to 1")
        if any(r <= 0 for r in self.rates):
            raise ValidationError("every rate must be positive")


def compute_rates(spec: MixtureSpec) -> SamplePlan:
    """Normalized sampling rates: min(size, cap) ** (1/T), renormalized."""
    if not spec.members:
        raise EmptyInputError("empty-mixture", "mixture has no members")
    cap = spec.size_cap
    weights = [
        (member.size if cap is None else min(member.size, cap)) ** (1.0 / spec.temperature)
        for member in spec.members
    ]
    total = sum(weights)
    return SamplePlan(
        datasets=tuple(m.dataset_id for m in spec.members),
        rates=tuple(w / total for w in weights),
        seed=spec.seed,
        epoch_length=spec.epoch_length,
    )


def group_by_task(spec: MixtureSpec, family: TaskFamily) -> MixtureSpec:
    """Sub-mixture of exactly the members of one family; same T, cap, seed."""
    members = tuple(m for m in spec.members if m.family is family)
    if not members:
        raise EmptyInputError("empty-task-group", f"no members of family {family.value!r}")
    return replace(spec, members=members)


def _counter_unit(seed: int, stream: bytes, counter: int) -> float:
    """Uniform float in [0, 1) keyed on (seed, stream, counter)."""
    digest = blake2b(
        struct.pack("<q", seed) + stream + struct.pack("<Q", counter),
        digest_size=8,
    ).digest()
    return int.from_bytes(digest, "little") / 2.0**64


def _member_seed(seed: int, dataset_id: str) -> int:
    digest = blake2b(
        struct.pack("<q", seed) + b"shuffle:" + dataset_id.encode("utf-8"),
        digest_size=8,
    ).digest()
    return int.from_bytes(digest, "little")


class _ShuffledCycle:
    """Without-replacement index server: a fresh seeded permutation per pass."""

    def __init__(self, size: int, seed: int):
        self._size = size
        self._rng = random.Random(seed)
        self._order: list[int] = []
        self._pos = 0

    def next_index(self) -> int:
        if self._pos >= len(self._order):
            self._order = list(range(self._size))
            self._rng.shuffle(self._order)
            self._pos = 0
        index = self._order[self._pos]
        self._pos += 1
        return index


def sample_stream(plan: SamplePlan, shards: Mapping[str, Sequence[T]]) -> Iterator[T]:
    """Yield ``epoch_length`` examples drawn by the plan's rates.

    Identical (plan, shards) inputs produce a byte-identical stream.
    """
    for dataset in plan.datasets:
        if dataset not in shards:
            raise FileNotFoundError(f"no shard supplied for dataset {dataset!r}")
        if len(shards[dataset]) == 0:
            raise EmptyInputError("empty-shard", f"dataset {dataset!r} has no examples")
    cycles = {
        dataset: _ShuffledCycle(len(shards[dataset]), _member_seed(plan.seed, dataset))
        for dataset in plan.datasets
    }
    cumulative = list(accumulate(plan.rates))
    cumulative[-1] = 1.0  # guard the final bin against rounding
    for position in range(plan.epoch_length):
        u = _counter_unit(plan.seed, b"draw", position)
        member = plan.datasets[bisect_right(cumulative, u)]
        yield shards[member][cycles[member].next_index()]
