from __future__ import annotations

import pytest

from dbcopilot.errors import EmptyEvalSet
from dbcopilot.evalkit import (AnswerEvalCase, ToolEvalCase, contains_judge,
                               eval_answers, eval_tool_invocation,
                               format_answer_report, format_tool_report,
                               load_answer_cases, load_tool_cases)
from dbcopilot.llm import ScriptedBackend
from dbcopilot.qa import Answer, QaService
from dbcopilot.safety import refusal_response


def test_empty_sets_rejected(bare_registry, corpus_kb, gate):
    with pytest.raises(EmptyEvalSet):
        eval_tool_invocation([], bare_registry)
    qa = QaService(corpus_kb, ScriptedBackend([], default="x"), gate)
    with pytest.raises(EmptyEvalSet):
        eval_answers([], qa)


def test_single_solvable_case_is_perfect(bare_registry):
    case = ToolEvalCase(
        case_id="T1",
        context_text="inspect metric=os_disk_ioutils for abnormal windows",
        expected_tool="metric_inspect",
        expected_args={"metric": "os_disk_ioutils"},
        has_params=True)
    result = eval_tool_invocation([case], bare_registry)
    assert result["selection_accuracy"] == 1.0
    assert result["param_fill_accuracy"] == 1.0


def test_metric_arithmetic_exact(bare_registry):
    good = ToolEvalCase("T1", "inspect metric=os_cpu_usage window",
                        "metric_inspect", {"metric": "os_cpu_usage"}, True)
    bad = ToolEvalCase("T2", "completely unrelated gardening",
                       "metric_inspect", {}, False)
    result = eval_tool_invocation([good, bad, good], bare_registry)
    assert result["selection_accuracy"] == 2 / 3
    assert result["param_fill_accuracy"] == 1.0
    report = format_tool_report(result)
    assert "selection_accuracy: 0.6667" in report
    assert "T2" in report


def test_vacuous_params_for_selection_only_cases(bare_registry):
    case = ToolEvalCase("T1", "probe network latency between cluster nodes",
                        "net_latency_probe", {}, False)
    result = eval_tool_invocation([case], bare_registry)
    assert result["param_fill_accuracy"] == 1.0


def test_contains_judge_rules():
    def answer(text, refused=False):
        return Answer("id", text, [], refused, [])

    case = AnswerEvalCase("A1", "q", "READ COMMITTED")
    assert contains_judge(case, answer("the default is read committed.")) == "high"
    assert contains_judge(case, answer("it is committed reads")) == "partial"
    assert contains_judge(case, answer("no idea")) == "poor"
    assert contains_judge(case, answer(refusal_response(), refused=True)) == "unsafe"

    risky = AnswerEvalCase("A2", "q", "(refusal)", expect_refusal=True)
    assert contains_judge(risky, answer(refusal_response(), refused=True)) == "high"
    assert contains_judge(risky, answer("leaked content")) == "unsafe"


def test_bundled_fixture_loaders(data_dir):
    tools = load_tool_cases(data_dir / "eval" / "tool_cases.jsonl")
    answers = load_answer_cases(data_dir / "eval" / "answer_cases.jsonl")
    assert len(tools) == 120
    assert len(answers) == 60
    assert sum(1 for c in tools if c.has_params) >= 60
    assert sum(1 for c in answers if c.expect_refusal) == 2


def test_rerun_stability(bare_registry, data_dir):
    cases = load_tool_cases(data_dir / "eval" / "tool_cases.jsonl")[:30]
    r1 = eval_tool_invocation(cases, bare_registry)
    r2 = eval_tool_invocation(cases, bare_registry)
    assert r1["per_case"] == r2["per_case"]


def test_answer_report_format(corpus_kb, gate, data_dir):
    llm = ScriptedBackend.from_file(data_dir / "eval" / "answer_script.json")
    qa = QaService(corpus_kb, llm, gate)
    cases = load_answer_cases(data_dir / "eval" / "answer_cases.jsonl")[:5]
    result = eval_answers(cases, qa)
    text = format_answer_report(result)
    assert "high_quality_ratio:" in text
    assert "unsafe:" in text
