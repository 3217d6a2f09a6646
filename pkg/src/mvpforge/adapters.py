"""Per-family adapters from dataset-native JSONL objects to raw records.

Native schemas (one JSON object per line):

  data-to-text            {"triples": [[s, r, o], ...], "target": str}
                          or {"pairs": [[k, v], ...], "target": str}
  open-dialogue           {"persona": [str, ...], "turns": [str, ...], "target": str}
  question-answering      {"question": str, "answer": str?, "context": str?,
                           "history": [[q, a], ...]?}
  question-generation     {"question": str, "answer": str, "context": str}
  task-oriented-dialogue  {"history": [str, ...], "db": str, "belief": str,
                           "action": str, "response": str}
  all other families      {"source": str, "target": str}
"""

import json

from .errors import SchemaError
from .model import (
    DialogueContext,
    KeyValueTable,
    PlainPair,
    QATuple,
    RawRecord,
    TaskFamily,
    TodRecord,
    TripleSet,
)


def _require(obj: dict, key: str, line: int):
    try:
        return obj[key]
    except KeyError:
        raise SchemaError(f"missing field {key!r}", line=line) from None


def _str_list(value, key: str, line: int) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SchemaError(f"field {key!r} must be a list of strings", line=line)
    return tuple(value)


def parse_native(family: TaskFamily, obj: dict, dataset_id: str, split: str, line: int = 0) -> RawRecord:
    """Build a RawRecord from one dataset-native JSON object."""
    if family is TaskFamily.DATA_TO_TEXT:
        target = obj.get("target", "")
        if "triples" in obj:
            triples = []
            for t in _require(obj, "triples", line):
                if not isinstance(t, list) or len(t) != 3:
                    raise SchemaError("each triple must be a [subject, relation, object] list", line=line)
                triples.append((str(t[0]), str(t[1]), str(t[2])))
            payload = TripleSet(triples=tuple(triples))
        elif "pairs" in obj:
            pairs = []
            for p in _require(obj, "pairs", line):
                if not isinstance(p, list) or len(p) != 2:
                    raise SchemaError("each pair must be a [key, value] list", line=line)
                pairs.append((str(p[0]), str(p[1])))
            payload = KeyValueTable(pairs=tuple(pairs))
        else:
            raise SchemaError("data-to-text record needs 'triples' or 'pairs'", line=line)
        return RawRecord(dataset_id, split, payload, target=target)

    if family is TaskFamily.OPEN_DIALOGUE:
        payload = DialogueContext(
            persona=_str_list(obj.get("persona", []), "persona", line),
            turns=_str_list(_require(obj, "turns", line), "turns", line),
        )
        return RawRecord(dataset_id, split, payload, target=obj.get("target", ""))

    if family in (TaskFamily.QUESTION_ANSWERING, TaskFamily.QUESTION_GENERATION):
        history = []
        for h in obj.get("history", []):
            if not isinstance(h, list) or len(h) != 2:
                raise SchemaError("each history item must be a [question, answer] list", line=line)
            history.append((str(h[0]), str(h[1])))
        payload = QATuple(
            question=str(_require(obj, "question", line)),
            answer=obj.get("answer"),
            context=obj.get("context"),
            history=tuple(history),
        )
        return RawRecord(dataset_id, split, payload)

    if family is TaskFamily.TASK_ORIENTED_DIALOGUE:
        payload = TodRecord(
            history=_str_list(_require(obj, "history", line), "history", line),
            db=str(obj.get("db", "")),
            belief=str(_require(obj, "belief", line)),
            action=str(_require(obj, "action", line)),
            response=str(_require(obj, "response", line)),
        )
        return RawRecord(dataset_id, split, payload)

    payload = PlainPair(
        source=str(_require(obj, "source", line)),
        target=str(obj.get("target", "")),
    )
    return RawRecord(dataset_id, split, payload)


def parse_native_line(family: TaskFamily, raw_line: str, dataset_id: str, split: str, line: int = 0) -> RawRecord:
    try:
        obj = json.loads(raw_line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}", line=line) from exc
    if not isinstance(obj, dict):
        raise SchemaError("record must be a JSON object", line=line)
    return parse_native(family, obj, dataset_id, split, line=line)
