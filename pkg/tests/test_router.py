from __future__ import annotations

import json

from dbcopilot.llm import ScriptedBackend, ScriptRule
from dbcopilot.router import (Intent, IntentSource, decompose, expand_question,
                              process_question, route_intent)


def scripted(rules, default="QA"):
    return ScriptedBackend([ScriptRule(**r) for r in rules], default)


# ------------------------------------------------------------------ expansion

def test_expand_no_table_no_llm():
    assert expand_question("how to create index", {}) == ["how to create index"]


def test_expand_synonym_substitution():
    table = {"index": ["secondary index"]}
    out = expand_question("create index", table)
    assert out[0] == "create index"
    assert "create secondary index" in out


def test_expand_counts_per_applicable_term():
    table = {"index": ["secondary index"], "table": ["relation"],
             "slow": ["sluggish"], "memory": ["ram"]}
    q = "index on a table is slow"
    out = expand_question(q, table)
    assert len(out) == 4  # original + three applicable single-term substitutions
    assert out[0] == q


def test_expand_llm_rephrasings_and_cap():
    table = {f"w{i}": [f"v{i}"] for i in range(9)}
    q = " ".join(f"w{i}" for i in range(9))
    llm = scripted([], default="first rephrase\nsecond rephrase\nthird one")
    out = expand_question(q, table, llm)
    assert len(out) == 8  # capped
    assert out[0] == q


def test_expand_whole_word_only():
    out = expand_question("reindex the database", {"index": ["secondary index"]})
    assert out == ["reindex the database"]  # 'index' inside a word never fires


# ------------------------------------------------------------------ decompose

def test_decompose_question_marks():
    out = decompose("How to create an index? How to drop it?")
    assert out == ["How to create an index?", "How to drop it?"]


def test_decompose_single_clause():
    assert decompose("How to create an index") == ["How to create an index"]


def test_decompose_conjunction():
    assert decompose("check CPU and also check memory") == \
        ["check CPU", "check memory"]


def test_decompose_llm_refines_single_clause():
    llm = scripted([], default="first sub-question\nsecond sub-question")
    assert decompose("compound but implicit ask", llm) == \
        ["first sub-question", "second sub-question"]


def test_decompose_rule_wins_over_llm():
    llm = scripted([], default="should never be used")
    out = decompose("check CPU and also check memory", llm)
    assert out == ["check CPU", "check memory"]


# ------------------------------------------------------------------ intent

def test_route_alert_wording_is_rule_diagnosis():
    intent, source = route_intent("Abnormal I/O Usage on node 3")
    assert intent is Intent.DIAGNOSIS and source is IntentSource.RULE


def test_route_plain_question_is_qa():
    intent, source = route_intent("What isolation levels are supported?")
    assert intent is Intent.QA and source is IntentSource.RULE


def test_route_llm_diagnosis_for_trigger_free_question():
    llm = scripted([{"trigger": "feels sluggish", "response": "DIAGNOSIS"}])
    intent, source = route_intent("the instance feels sluggish today", llm)
    assert intent is Intent.DIAGNOSIS and source is IntentSource.LLM


def test_route_unparseable_llm_defaults_qa():
    llm = scripted([], default="cannot tell, sorry")
    intent, source = route_intent("anything ambiguous", llm)
    assert intent is Intent.QA and source is IntentSource.RULE


def test_route_rule_precedence_skips_llm():
    class Exploding:
        def complete(self, messages):
            raise AssertionError("LLM must not be consulted when a rule fires")

    intent, source = route_intent("diagnose the lock waits", Exploding())
    assert intent is Intent.DIAGNOSIS and source is IntentSource.RULE


def test_intent_fixture_full_accuracy(data_dir):
    cases = [json.loads(line) for line in
             (data_dir / "eval" / "intent_cases.jsonl").read_text().splitlines()]
    assert len(cases) == 40
    llm = ScriptedBackend.from_file(data_dir / "eval" / "intent_script.json")
    for case in cases:
        backend = llm if case["needs_llm"] else None
        intent, source = route_intent(case["question"], backend)
        assert intent.value == case["intent"], case
        expected_source = IntentSource.LLM if case["needs_llm"] else IntentSource.RULE
        assert source is expected_source, case


# ------------------------------------------------------------------ totality

def test_process_question_total():
    pq = process_question("How to create an index? And why is it slow?",
                          {"index": ["secondary index"]})
    assert pq.original in pq.variants
    assert pq.sub_queries and all(pq.sub_queries)
    assert pq.intent in (Intent.QA, Intent.DIAGNOSIS)


def test_process_question_empty_subqueries_fallback():
    pq = process_question("single ask", {})
    assert pq.sub_queries == ["single ask"]
