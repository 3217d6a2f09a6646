"""Shared data model: task taxonomy, record payloads, unified examples, manifests.

Every type here is immutable after construction and safe to share across
threads; all operations are pure.
"""

import json
import os
import warnings
from dataclasses import dataclass, field
from enum import Enum

from .errors import SchemaError, ValidationError

SPLITS = ("train", "valid", "test")


class TaskFamily(str, Enum):
    """The eleven supported generation task families.

    Seven of them (the "seen" set) participate in multi-task pre-training;
    the remaining four only appear in evaluation corpora.
    """

    COMMONSENSE_GENERATION = "commonsense-generation"
    DATA_TO_TEXT = "data-to-text"
    OPEN_DIALOGUE = "open-dialogue"
    PARAPHRASE = "paraphrase"
    QUESTION_ANSWERING = "question-answering"
    QUESTION_GENERATION = "question-generation"
    STORY_GENERATION = "story-generation"
    TASK_ORIENTED_DIALOGUE = "task-oriented-dialogue"
    SIMPLIFICATION = "simplification"
    STYLE_TRANSFER = "style-transfer"
    SUMMARIZATION = "summarization"

    @property
    def seen(self) -> bool:
        return self in SEEN_FAMILIES


SEEN_FAMILIES = frozenset(
    {
        TaskFamily.DATA_TO_TEXT,
        TaskFamily.OPEN_DIALOGUE,
        TaskFamily.QUESTION_ANSWERING,
        TaskFamily.QUESTION_GENERATION,
        TaskFamily.STORY_GENERATION,
        TaskFamily.TASK_ORIENTED_DIALOGUE,
        TaskFamily.SUMMARIZATION,
    }
)


@dataclass(frozen=True)
class TripleSet:
    """Knowledge-graph triples: (subject, relation, object) strings."""

    triples: tuple[tuple[str, str, str], ...]


@dataclass(frozen=True)
class KeyValueTable:
    """Ordered (key, value) pairs from a flat table."""

    pairs: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class DialogueContext:
    """Chit-chat context: optional persona facts plus the turns so far.

    Turns are context only; the response to be generated travels as the
    record-level target.
    """

    persona: tuple[str, ...]
    turns: tuple[str, ...]


@dataclass(frozen=True)
class QATuple:
    """Question with optional answer, supporting context, and (q, a) history."""

    question: str
    answer: str | None = None
    context: str | None = None
    history: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class TodRecord:
    """Task-oriented dialogue turn: history, DB-result marker, three targets."""

    history: tuple[str, ...]
    db: str
    belief: str
    action: str
    response: str


@dataclass(frozen=True)
class PlainPair:
    """Source/target text pair needing no structural flattening."""

    source: str
    target: str


Payload = TripleSet | KeyValueTable | DialogueContext | QATuple | TodRecord | PlainPair

# Which payload variants each family accepts.
FAMILY_PAYLOADS: dict[TaskFamily, tuple[type, ...]] = {
    TaskFamily.DATA_TO_TEXT: (TripleSet, KeyValueTable),
    TaskFamily.OPEN_DIALOGUE: (DialogueContext,),
    TaskFamily.QUESTION_ANSWERING: (QATuple,),
    TaskFamily.QUESTION_GENERATION: (QATuple,),
    TaskFamily.TASK_ORIENTED_DIALOGUE: (TodRecord,),
    TaskFamily.SUMMARIZATION: (PlainPair,),
    TaskFamily.STORY_GENERATION: (PlainPair,),
    TaskFamily.COMMONSENSE_GENERATION: (PlainPair,),
    TaskFamily.PARAPHRASE: (PlainPair,),
    TaskFamily.SIMPLIFICATION: (PlainPair,),
    TaskFamily.STYLE_TRANSFER: (PlainPair,),
}


@dataclass(frozen=True)
class RawRecord:
    """One dataset-native example before unification.

    ``target`` carries the reference output for payload variants that do
    not embed one (triples, tables, dialogue contexts); variants with their
    own targets ignore it.
    """

    dataset_id: str
    split: str
    payload: Payload
    target: str | None = None


@dataclass(frozen=True)
class UnifiedExample:
    """One instruction-prefixed text-to-text pair with provenance."""

    task: TaskFamily
    dataset: str
    split: str
    instruction: str
    input: str
    output: str

    def to_json(self) -> str:
        """Wire format: one JSON object, fixed key order, raw UTF-8."""
        return json.dumps(
            {
                "task": self.task.value,
                "dataset": self.dataset,
                "split": self.split,
                "instruction": self.instruction,
                "input": self.input,
                "output": self.output,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "UnifiedExample":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from exc
        missing = {"task", "dataset", "split", "instruction", "input", "output"} - obj.keys()
        if missing:
            raise SchemaError(f"missing keys: {sorted(missing)}")
        try:
            task = TaskFamily(obj["task"])
        except ValueError:
            raise SchemaError(f"unknown task family {obj['task']!r}") from None
        return cls(
            task=task,
            dataset=obj["dataset"],
            split=obj["split"],
            instruction=obj["instruction"],
            input=obj["input"],
            output=obj["output"],
        )


def validate_example(ex: UnifiedExample) -> list[str]:
    """Return violation codes for ``ex``; empty list iff all invariants hold.

    Pure and deterministic: violations are returned, never raised.
    """
    violations = []
    if ex.split not in SPLITS:
        violations.append(f"invalid-split: {ex.split!r}")
    if not ex.instruction:
        violations.append("empty-instruction")
    elif not ex.input.startswith(ex.instruction + " "):
        violations.append("instruction-prefix: input does not start with its instruction")
    if ex.split in ("train", "valid") and not ex.output:
        violations.append("empty-target")
    return violations


@dataclass(frozen=True)
class SplitRef:
    """Path and declared example count for one split of a dataset."""

    path: str
    count: int


@dataclass(frozen=True)
class ManifestEntry:
    dataset_id: str
    family: TaskFamily
    splits: dict[str, SplitRef] = field(default_factory=dict)


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def load_manifest(path: str) -> Manifest:
    """Parse and validate a tab-separated manifest.

    One line per (dataset, split): ``dataset_id TAB family TAB split TAB
    path TAB count``. Relative paths resolve against the manifest's
    directory. Raises SchemaError (with line number) on malformed lines,
    ValidationError on duplicates or family conflicts, FileNotFoundError
    when a referenced path is missing.
    """
    base = os.path.dirname(os.path.abspath(path))
    entries: dict[str, dict] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise SchemaError(f"expected 5 tab-separated fields, got {len(fields)}", line=lineno)
            dataset_id, family_s, split, rel_path, count_s = fields
            try:
                family = TaskFamily(family_s)
            except ValueError:
                raise SchemaError(f"unknown task family {family_s!r}", line=lineno) from None
            if split not in SPLITS:
                raise SchemaError(f"unknown split {split!r}", line=lineno)
            try:
                count = int(count_s)
            except ValueError:
                raise SchemaError(f"count must be an integer, got {count_s!r}", line=lineno) from None
            if count < 0:
                raise SchemaError(f"count must be non-negative, got {count}", line=lineno)

            entry = entries.setdefault(dataset_id, {"family": family, "splits": {}})
            if entry["family"] is not family:
                raise ValidationError(
                    f"dataset {dataset_id!r} declared with conflicting families "
                    f"{entry['family'].value!r} and {family.value!r}"
                )
            if split in entry["splits"]:
                raise ValidationError(f"duplicate manifest entry for dataset {dataset_id!r} split {split!r}")
            resolved = rel_path if os.path.isabs(rel_path) else os.path.join(base, rel_path)
            if not os.path.exists(resolved):
                raise FileNotFoundError(f"manifest references missing file: {resolved}")
            entry["splits"][split] = SplitRef(path=resolved, count=count)

    if not entries:
        warnings.warn(f"manifest {path} is empty", stacklevel=2)
    return Manifest(
        entries=tuple(
            ManifestEntry(dataset_id=ds, family=spec["family"], splits=dict(spec["splits"]))
            for ds, spec in entries.items()
        )
    )
