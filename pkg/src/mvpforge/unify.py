"""Converts raw task records into instruction-prefixed text-to-text examples.

Each task family has a fixed instruction and a flattening rule built from
two special separator tokens. Field-internal occurrences of those tokens
are preserved verbatim (mutating user text would corrupt provenance) and
surfaced through the lint scanner instead.

All functions here are pure over immutable inputs and safe for
data-parallel batch conversion.
"""

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .errors import EmptyInputError, PayloadMismatchError, ValidationError
from .model import (
    FAMILY_PAYLOADS,
    DialogueContext,
    KeyValueTable,
    PlainPair,
    QATuple,
    RawRecord,
    TaskFamily,
    TodRecord,
    TripleSet,
    UnifiedExample,
)

DEFAULT_INSTRUCTIONS: Mapping[TaskFamily, str] = MappingProxyType(
    {
        TaskFamily.SUMMARIZATION: "Summarize:",
        TaskFamily.DATA_TO_TEXT: "Describe the following data:",
        TaskFamily.QUESTION_GENERATION: "Generate the question based on the answer:",
        TaskFamily.QUESTION_ANSWERING: "Answer the following question:",
        TaskFamily.STORY_GENERATION: "Given the story title:",
        TaskFamily.OPEN_DIALOGUE: "Given the dialog:",
        TaskFamily.TASK_ORIENTED_DIALOGUE: "Given the task dialog:",
    }
)

# Sub-target tags for the three examples a task-oriented dialogue turn yields.
BELIEF_TAG = "Belief state"
ACTION_TAG = "Dialogue action"
RESPONSE_TAG = "System response"

# Lint warning codes.
WARN_SEP_IN_FIELD = "sep-in-field"
WARN_XSEP_IN_FIELD = "xsep-in-field"
WARN_EMPTY_VALUE = "empty-value"


@dataclass(frozen=True)
class SeparatorConfig:
    """The two special tokens used when flattening structured inputs."""

    sep: str = "[SEP]"
    xsep: str = "[X_SEP]"

    def __post_init__(self):
        if not self.sep or not self.xsep:
            raise ValidationError("separator tokens must be non-empty")
        if self.sep == self.xsep:
            raise ValidationError("sep and xsep must differ")


@dataclass(frozen=True)
class InstructionTable:
    """Task family -> instruction prefix.

    Defaults cover the seven pre-training families; converting a family
    without an instruction requires the caller to supply one.
    """

    table: Mapping[TaskFamily, str] = field(default_factory=lambda: DEFAULT_INSTRUCTIONS)

    def __post_init__(self):
        for family in TaskFamily:
            if family.seen and not self.table.get(family):
                raise ValidationError(f"missing instruction for pre-training family {family.value!r}")

    def for_family(self, family: TaskFamily) -> str:
        instruction = self.table.get(family, "")
        if not instruction:
            raise ValidationError(f"no instruction configured for family {family.value!r}")
        return instruction


def linearize_triples(triples: TripleSet, seps: SeparatorConfig = SeparatorConfig()) -> str:
    """Flatten triples to ``s | r | o`` joined by the separator token."""
    if not triples.triples:
        raise EmptyInputError("empty-structure", "triple set has no triples")
    return f" {seps.sep} ".join(f"{s} | {r} | {o}" for s, r, o in triples.triples)


def linearize_table(tbl: KeyValueTable, seps: SeparatorConfig = SeparatorConfig()) -> str:
    """Flatten key-value pairs to ``k : v`` joined by the separator token."""
    if not tbl.pairs:
        raise EmptyInputError("empty-structure", "table has no pairs")
    return f" {seps.sep} ".join(f"{k} : {v}" for k, v in tbl.pairs)


def compose_qg_input(
    answer: str,
    paragraph: str,
    seps: SeparatorConfig = SeparatorConfig(),
    instr: InstructionTable = InstructionTable(),
) -> str:
    """Question-generation input: instruction, answer, separator, paragraph."""
    if not answer or not paragraph:
        raise EmptyInputError("empty-field", "question generation needs both answer and paragraph")
    instruction = instr.for_family(TaskFamily.QUESTION_GENERATION)
    return f"{instruction} {answer} {seps.sep} {paragraph}"


def compose_dialogue_input(
    persona: tuple[str, ...] | list[str],
    turns: tuple[str, ...] | list[str],
    seps: SeparatorConfig = SeparatorConfig(),
    instr: InstructionTable = InstructionTable(),
) -> str:
    """Open-dialogue input: persona block, cross-separator, then the turns.

    The persona block (and its cross-separator) is omitted entirely when no
    persona facts are given.
    """
    if not turns:
        raise EmptyInputError("empty-dialogue", "dialogue has no turns")
    instruction = instr.for_family(TaskFamily.OPEN_DIALOGUE)
    turn_block = f" {seps.sep} ".join(turns)
    if persona:
        body = f" {seps.sep} ".join(persona) + f" {seps.xsep} " + turn_block
    else:
        body = turn_block
    return f"{instruction} {body}"


def compose_qa_input(
    history: tuple[tuple[str, str], ...] | list[tuple[str, str]],
    question: str,
    context: str | None,
    seps: SeparatorConfig = SeparatorConfig(),
    instr: InstructionTable = InstructionTable(),
) -> str:
    """Question-answering input: history pairs, current question, context.

    Each history question is joined to its answer with the separator token;
    turns (and the trailing context, when present) are chained with the
    cross-separator token.
    """
    if not question:
        raise EmptyInputError("empty-field", "question is required")
    instruction = instr.for_family(TaskFamily.QUESTION_ANSWERING)
    parts = [f"{q} {seps.sep} {a}" for q, a in history]
    parts.append(question)
    body = f" {seps.xsep} ".join(parts)
    if context:
        body += f" {seps.xsep} {context}"
    return f"{instruction} {body}"


def _tod_inputs(rec: TodRecord, seps: SeparatorConfig, instruction: str) -> list[tuple[str, str]]:
    if not rec.history:
        raise EmptyInputError("empty-dialogue", "task-oriented record has no history")
    history = f" {seps.sep} ".join(rec.history)
    db_block = f"{rec.db} {seps.xsep} " if rec.db else ""
    return [
        (f"{instruction} {BELIEF_TAG} {seps.xsep} {history}", rec.belief),
        (f"{instruction} {ACTION_TAG} {seps.xsep} {db_block}{history}", rec.action),
        (f"{instruction} {RESPONSE_TAG} {seps.xsep} {db_block}{history}", rec.response),
    ]


def unify_record(
    rec: RawRecord,
    family: TaskFamily,
    instr: InstructionTable = InstructionTable(),
    seps: SeparatorConfig = SeparatorConfig(),
) -> list[UnifiedExample]:
    """Convert one raw record into its unified example(s).

    Every family yields exactly one example except task-oriented dialogue,
    which yields three (belief state, dialogue action, system response).
    """
    payload = rec.payload
    if not isinstance(payload, FAMILY_PAYLOADS[family]):
        raise PayloadMismatchError(
            f"payload {type(payload).__name__} does not match family {family.value!r}"
        )
    instruction = instr.for_family(family)

    def make(input_text: str, output: str) -> UnifiedExample:
        return UnifiedExample(
            task=family,
            dataset=rec.dataset_id,
            split=rec.split,
            instruction=instruction,
            input=input_text,
            output=output,
        )

    record_target = rec.target or ""

    if isinstance(payload, PlainPair):
        return [make(f"{instruction} {payload.source}", payload.target)]
    if isinstance(payload, TripleSet):
        return [make(f"{instruction} {linearize_triples(payload, seps)}", record_target)]
    if isinstance(payload, KeyValueTable):
        return [make(f"{instruction} {linearize_table(payload, seps)}", record_target)]
    if isinstance(payload, DialogueContext):
        return [make(compose_dialogue_input(payload.persona, payload.turns, seps, instr), record_target)]
    if isinstance(payload, QATuple):
        if family is TaskFamily.QUESTION_GENERATION:
            if not payload.answer or not payload.context:
                raise EmptyInputError("empty-field", "question generation needs both answer and paragraph")
            return [make(compose_qg_input(payload.answer, payload.context, seps, instr), payload.question)]
        input_text = compose_qa_input(payload.history, payload.question, payload.context, seps, instr)
        return [make(input_text, payload.answer or "")]
    if isinstance(payload, TodRecord):
        return [make(text, target) for text, target in _tod_inputs(payload, seps, instruction)]
    raise PayloadMismatchError(f"unhandled payload type {type(payload).__name__}")


def _payload_fields(payload) -> list[tuple[str, str]]:
    """(field-name, text) pairs for every string carried by a payload."""
    if isinstance(payload, TripleSet):
        return [(part, text) for triple in payload.triples for part, text in zip(("subject", "relation", "object"), triple)]
    if isinstance(payload, KeyValueTable):
        out = []
        for k, v in payload.pairs:
            out.append(("key", k))
            out.append(("value", v))
        return out
    if isinstance(payload, DialogueContext):
        return [("persona", p) for p in payload.persona] + [("turn", t) for t in payload.turns]
    if isinstance(payload, QATuple):
        fields = [("question", payload.question)]
        if payload.answer is not None:
            fields.append(("answer", payload.answer))
        if payload.context is not None:
            fields.append(("context", payload.context))
        for q, a in payload.history:
            fields.append(("history-question", q))
            fields.append(("history-answer", a))
        return fields
    if isinstance(payload, TodRecord):
        return [("turn", t) for t in payload.history] + [("db", payload.db)]
    if isinstance(payload, PlainPair):
        return [("source", payload.source), ("target", payload.target)]
    return []


def lint_payload(payload, seps: SeparatorConfig = SeparatorConfig(), target: str | None = None) -> list[str]:
    """Warning codes for text that will survive flattening verbatim.

    One code per offending field: separator tokens embedded in field text,
    and empty table values (kept as ``k : ``).
    """
    warnings = []
    fields = _payload_fields(payload)
    if target is not None:
        fields.append(("target", target))
    for name, text in fields:
        if seps.sep in text:
            warnings.append(WARN_SEP_IN_FIELD)
        if seps.xsep in text:
            warnings.append(WARN_XSEP_IN_FIELD)
        if name == "value" and not text:
            warnings.append(WARN_EMPTY_VALUE)
    return warnings
