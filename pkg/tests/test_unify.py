import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvpforge.errors import EmptyInputError, PayloadMismatchError, ValidationError
from mvpforge.model import (
    DialogueContext,
    KeyValueTable,
    PlainPair,
    QATuple,
    RawRecord,
    TaskFamily,
    TodRecord,
    TripleSet,
    validate_example,
)
from mvpforge.unify import (
    WARN_EMPTY_VALUE,
    WARN_SEP_IN_FIELD,
    WARN_XSEP_IN_FIELD,
    InstructionTable,
    SeparatorConfig,
    compose_dialogue_input,
    compose_qa_input,
    compose_qg_input,
    linearize_table,
    linearize_triples,
    lint_payload,
    unify_record,
)

SEPS = SeparatorConfig()
INSTR = InstructionTable()

field_text = st.text(
    alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd"), whitelist_characters=" "),
    min_size=1,
    max_size=30,
).filter(lambda s: s.strip())


class TestSeparatorConfig:
    def test_defaults(self):
        assert SEPS.sep == "[SEP]" and SEPS.xsep == "[X_SEP]"

    def test_equal_tokens_rejected(self):
        with pytest.raises(ValidationError):
            SeparatorConfig(sep="[SEP]", xsep="[SEP]")

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            SeparatorConfig(sep="", xsep="[X_SEP]")


class TestInstructionTable:
    def test_seen_families_covered(self):
        for family in TaskFamily:
            if family.seen:
                assert INSTR.for_family(family)

    def test_missing_seen_instruction_rejected(self):
        table = {f: i for f, i in INSTR.table.items() if f is not TaskFamily.SUMMARIZATION}
        with pytest.raises(ValidationError, match="summarization"):
            InstructionTable(table=table)

    def test_unseen_family_needs_explicit_instruction(self):
        with pytest.raises(ValidationError, match="paraphrase"):
            INSTR.for_family(TaskFamily.PARAPHRASE)


class TestLinearizeTriples:
    def test_single_triple(self):
        out = linearize_triples(
            TripleSet(triples=(("Abilene,_Texas", "cityServed", "Abilene_Regional_Airport"),)), SEPS
        )
        assert out == "Abilene,_Texas | cityServed | Abilene_Regional_Airport"

    def test_two_triples_single_sep(self):
        out = linearize_triples(TripleSet(triples=(("a", "b", "c"), ("d", "e", "f"))), SEPS)
        assert out == "a | b | c [SEP] d | e | f"
        assert out.count("[SEP]") == 1

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError, match="empty-structure"):
            linearize_triples(TripleSet(triples=()), SEPS)

    def test_field_with_sep_passes_through_and_lints(self):
        payload = TripleSet(triples=(("x [SEP] y", "r", "o"),))
        assert "x [SEP] y" in linearize_triples(payload, SEPS)
        assert lint_payload(payload, SEPS) == [WARN_SEP_IN_FIELD]

    @given(
        st.lists(st.tuples(field_text, field_text, field_text), min_size=1, max_size=8).filter(
            lambda ts: all("[SEP]" not in part for t in ts for part in t)
        )
    )
    @settings(max_examples=60)
    def test_separator_count_property(self, triples):
        out = linearize_triples(TripleSet(triples=tuple(triples)), SEPS)
        assert out.count(SEPS.sep) == len(triples) - 1


class TestLinearizeTable:
    def test_single_pair(self):
        assert linearize_table(KeyValueTable(pairs=(("name", "ken"),)), SEPS) == "name : ken"

    def test_three_pairs_two_seps(self):
        out = linearize_table(KeyValueTable(pairs=(("a", "1"), ("b", "2"), ("c", "3"))), SEPS)
        assert out.count("[SEP]") == 2
        assert out == "a : 1 [SEP] b : 2 [SEP] c : 3"

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError, match="empty-structure"):
            linearize_table(KeyValueTable(pairs=()), SEPS)

    def test_empty_value_kept_and_linted(self):
        payload = KeyValueTable(pairs=(("k", ""),))
        assert linearize_table(payload, SEPS) == "k : "
        assert lint_payload(payload, SEPS) == [WARN_EMPTY_VALUE]


class TestComposeQg:
    def test_minimal(self):
        assert compose_qg_input("a", "b", SEPS, INSTR) == "Generate the question based on the answer: a [SEP] b"

    def test_empty_field_rejected(self):
        with pytest.raises(EmptyInputError, match="empty-field"):
            compose_qg_input("", "b", SEPS, INSTR)
        with pytest.raises(EmptyInputError, match="empty-field"):
            compose_qg_input("a", "", SEPS, INSTR)

    def test_xsep_inside_answer_lints(self):
        payload = QATuple(question="q", answer="a [X_SEP] b", context="ctx")
        assert lint_payload(payload, SEPS) == [WARN_XSEP_IN_FIELD]
        out = compose_qg_input("a [X_SEP] b", "ctx", SEPS, INSTR)
        assert "a [X_SEP] b" in out


class TestComposeDialogue:
    def test_no_persona_one_turn(self):
        assert compose_dialogue_input([], ["hi"], SEPS, INSTR) == "Given the dialog: hi"

    def test_no_persona_two_turns(self):
        assert compose_dialogue_input([], ["a", "b"], SEPS, INSTR) == "Given the dialog: a [SEP] b"

    def test_persona_block_omitted_entirely_when_empty(self):
        out = compose_dialogue_input([], ["a"], SEPS, INSTR)
        assert "[X_SEP]" not in out

    def test_empty_turns_rejected(self):
        with pytest.raises(EmptyInputError, match="empty-dialogue"):
            compose_dialogue_input(["fact"], [], SEPS, INSTR)


class TestComposeQa:
    def test_bare_question(self):
        assert compose_qa_input([], "q", None, SEPS, INSTR) == "Answer the following question: q"

    def test_question_with_context(self):
        assert compose_qa_input([], "q", "c", SEPS, INSTR) == "Answer the following question: q [X_SEP] c"

    def test_history_rendering(self):
        out = compose_qa_input([("q1", "a1"), ("q2", "a2")], "q3", "ctx", SEPS, INSTR)
        assert out == "Answer the following question: q1 [SEP] a1 [X_SEP] q2 [SEP] a2 [X_SEP] q3 [X_SEP] ctx"

    def test_empty_question_rejected(self):
        with pytest.raises(EmptyInputError):
            compose_qa_input([], "", None, SEPS, INSTR)


class TestUnifyRecord:
    def test_summarization_plain_pair(self):
        rec = RawRecord("cnndm", "train", PlainPair(source="doc", target="sum"))
        (ex,) = unify_record(rec, TaskFamily.SUMMARIZATION)
        assert ex.input == "Summarize: doc"
        assert ex.output == "sum"
        assert validate_example(ex) == []

    def test_qa_degenerate(self):
        rec = RawRecord("squad", "test", QATuple(question="q"))
        (ex,) = unify_record(rec, TaskFamily.QUESTION_ANSWERING)
        assert ex.input == "Answer the following question: q"

    def test_tod_yields_three(self):
        rec = RawRecord(
            "multiwoz",
            "train",
            TodRecord(history=("turn",), db="[db_nores]", belief="b", action="a", response="r"),
        )
        examples = unify_record(rec, TaskFamily.TASK_ORIENTED_DIALOGUE)
        assert len(examples) == 3
        assert examples[0].input.startswith("Given the task dialog: Belief state [X_SEP]")
        assert examples[1].input.startswith("Given the task dialog: Dialogue action [X_SEP]")
        assert examples[2].input.startswith("Given the task dialog: System response [X_SEP]")
        assert [ex.output for ex in examples] == ["b", "a", "r"]

    def test_payload_mismatch_names_both(self):
        rec = RawRecord("x", "train", PlainPair(source="s", target="t"))
        with pytest.raises(PayloadMismatchError, match="PlainPair.*data-to-text"):
            unify_record(rec, TaskFamily.DATA_TO_TEXT)

    def test_data_to_text_uses_record_target(self):
        rec = RawRecord("webnlg", "train", TripleSet(triples=(("s", "r", "o"),)), target="desc")
        (ex,) = unify_record(rec, TaskFamily.DATA_TO_TEXT)
        assert ex.input == "Describe the following data: s | r | o"
        assert ex.output == "desc"

    def test_dialogue_uses_record_target(self):
        rec = RawRecord("pc", "train", DialogueContext(persona=(), turns=("hi",)), target="hello")
        (ex,) = unify_record(rec, TaskFamily.OPEN_DIALOGUE)
        assert ex.output == "hello"

    def test_qg_output_is_question(self):
        rec = RawRecord("squad", "train", QATuple(question="who ?", answer="her", context="ctx"))
        (ex,) = unify_record(rec, TaskFamily.QUESTION_GENERATION)
        assert ex.input == "Generate the question based on the answer: her [SEP] ctx"
        assert ex.output == "who ?"

    def test_determinism(self):
        rec = RawRecord("webnlg", "train", TripleSet(triples=(("s", "r", "o"),)), target="d")
        assert unify_record(rec, TaskFamily.DATA_TO_TEXT) == unify_record(rec, TaskFamily.DATA_TO_TEXT)


@st.composite
def raw_records(draw):
    family = draw(st.sampled_from(sorted(TaskFamily, key=lambda f: f.value)))
    target = draw(field_text)
    if family is TaskFamily.DATA_TO_TEXT:
        if draw(st.booleans()):
            triples = draw(st.lists(st.tuples(field_text, field_text, field_text), min_size=1, max_size=4))
            payload = TripleSet(triples=tuple(triples))
        else:
            pairs = draw(st.lists(st.tuples(field_text, field_text), min_size=1, max_size=4))
            payload = KeyValueTable(pairs=tuple(pairs))
    elif family is TaskFamily.OPEN_DIALOGUE:
        payload = DialogueContext(
            persona=tuple(draw(st.lists(field_text, max_size=3))),
            turns=tuple(draw(st.lists(field_text, min_size=1, max_size=4))),
        )
    elif family in (TaskFamily.QUESTION_ANSWERING, TaskFamily.QUESTION_GENERATION):
        payload = QATuple(
            question=draw(field_text),
            answer=draw(field_text),
            context=draw(field_text),
            history=tuple(draw(st.lists(st.tuples(field_text, field_text), max_size=2))),
        )
    elif family is TaskFamily.TASK_ORIENTED_DIALOGUE:
        payload = TodRecord(
            history=tuple(draw(st.lists(field_text, min_size=1, max_size=3))),
            db="[db_nores]",
            belief=draw(field_text),
            action=draw(field_text),
            response=draw(field_text),
        )
    else:
        payload = PlainPair(source=draw(field_text), target=target)
    return RawRecord("fuzz", "train", payload, target=target), family


class TestCrossModuleProperty:
    @given(raw_records())
    @settings(max_examples=120)
    def test_every_unified_example_validates(self, record_family):
        record, family = record_family
        table = dict(INSTR.table)
        if not family.seen:
            table[family] = "Rewrite:"
        examples = unify_record(record, family, InstructionTable(table=table), SEPS)
        assert len(examples) == (3 if family is TaskFamily.TASK_ORIENTED_DIALOGUE else 1)
        for ex in examples:
            assert validate_example(ex) == []

    @given(raw_records())
    @settings(max_examples=60)
    def test_instruction_appears_exactly_once_as_prefix(self, record_family):
        record, family = record_family
        table = dict(INSTR.table)
        if not family.seen:
            table[family] = "Rewrite:"
        instr = InstructionTable(table=table)
        for ex in unify_record(record, family, instr, SEPS):
            assert ex.input.startswith(ex.instruction + " ")
            # payload text never contains the instruction, so exactly one occurrence
            assert ex.input.count(ex.instruction) == 1
