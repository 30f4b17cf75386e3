from __future__ import annotations

import json
import re

import pytest

from dbcopilot.agents import (CrossReviewMessage, DiagnosisConfig,
                              DiagnosisEngine, DiagnosisTask, FAMILY_GUIDELINES,
                              MissingParamsError, aggregate_and_render,
                              assign_experts, decompose_tasks, expert_step,
                              load_profiles, parse_verdict, root_cause_family,
                              run_diagnosis)
from dbcopilot.diagtree import load_tree_dir
from dbcopilot.errors import EmptyAlert
from dbcopilot.llm import Backend, ScriptedBackend
from dbcopilot.retrieval import LexicalOverlapReranker
from dbcopilot.tools import ToolSession


@pytest.fixture(scope="module")
def profiles(data_dir):
    return load_profiles(data_dir / "agents.json")


@pytest.fixture(scope="module")
def trees(data_dir):
    return load_tree_dir(data_dir / "trees")


@pytest.fixture(scope="module")
def demo_llm(data_dir):
    return ScriptedBackend.from_file(data_dir / "scripts" / "demo.json")


def config(profiles, registry, trees, llm=None, **kw):
    return DiagnosisConfig(profiles=profiles, registry=registry,
                           tree_library=trees, llm=llm, **kw)


def markdown_lint(text: str) -> list[str]:
    """Tiny renderer-safety oracle: balanced fences, consistent table rows."""
    problems = []
    if text.count("```") % 2:
        problems.append("unbalanced code fence")
    width = None
    for line in text.splitlines():
        if line.startswith("|"):
            cells = line.strip().strip("|").split("|")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                problems.append(f"ragged table row: {line!r}")
        else:
            width = None
    return problems


# ------------------------------------------------------------------ assignment

def test_assign_resource_expert_first(profiles):
    ranked = assign_experts("Abnormal I/O Usage", profiles, 2)
    assert ranked and ranked[0].name == "Resource Expert"


def test_assign_fallback_generalist(profiles):
    ranked = assign_experts("printer on fire in the lobby", profiles, 2)
    assert [p.role for p in ranked] == ["generalist"]


def test_assignment_matches_hand_scoring(profiles):
    scorer = LexicalOverlapReranker()
    alert = "Abnormal I/O Usage"
    experts = [p for p in profiles if p.role == "expert"]
    scores = {p.agent_id: scorer.score(alert, f"{p.name}. {p.description}")
              for p in experts}
    expected = [aid for aid, s in sorted(scores.items(), key=lambda kv: -kv[1])
                if s >= 0]
    ranked = assign_experts(alert, profiles, 3)
    assert [p.agent_id for p in ranked] == expected


# ------------------------------------------------------------------ decompose

def test_decompose_with_tree_includes_demo_task(profiles, trees):
    resource = next(p for p in profiles if p.agent_id == "resource_expert")
    high_io = next(t for t in trees if t.tree_id == "high_io")
    tasks = decompose_tasks("Abnormal I/O Usage", resource, high_io)
    assert tasks[0].instruction.startswith("Checking the High I/O Usage")
    assert tasks[0].node_id == "check_io_metric"
    assert tasks[1].node_id == "find_io_process"
    assert tasks[1].handoff_node_id == "analyze_slow_sql"
    assert tasks[-1].kind == "verify"
    assert len(tasks) <= 6


def test_decompose_without_tree_scripted_steps(profiles):
    resource = next(p for p in profiles if p.agent_id == "resource_expert")
    llm = ScriptedBackend([], default="step one\nstep two\nstep three\nstep four"
                                      "\nstep five\nstep six\nstep seven")
    tasks = decompose_tasks("strange alert", resource, None, llm=llm)
    assert len(tasks) == 6  # capped
    assert tasks[0].instruction == "step one"


def test_decompose_empty_alert(profiles):
    with pytest.raises(EmptyAlert):
        decompose_tasks("   ", profiles[0], None)


# ------------------------------------------------------------------ verdicts

def test_parse_verdicts():
    assert parse_verdict("CONCLUDED: found it").kind == "concluded"
    assert parse_verdict("NEEDS_MORE: try again").hint == "try again"
    handoff = parse_verdict("HANDOFF component_expert: take over")
    assert handoff.kind == "handoff" and handoff.to_agent == "component_expert"
    assert parse_verdict("no verdict here") is None
    assert parse_verdict("HANDOFF : missing target") is None


def test_root_cause_family():
    assert root_cause_family("slow SQL causing disk I/O") == "io"
    assert root_cause_family("lock contention from long transaction") == "lock"
    assert root_cause_family("cpu saturation from join") == "cpu"
    assert root_cause_family("stale statistics") == "other"


# ------------------------------------------------------------------ expert step

def test_expert_step_concluded_with_script(profiles, trees, scenario_registry, demo_llm):
    registry = scenario_registry("high_io")
    resource = next(p for p in profiles if p.agent_id == "resource_expert")
    high_io = next(t for t in trees if t.tree_id == "high_io")
    task = decompose_tasks("Abnormal I/O Usage", resource, high_io)[0]
    outcome = expert_step(task, demo_llm, registry, ToolSession("s"), resource)
    assert outcome.kind == "concluded"
    assert outcome.finding == "the os_disk_ioutils metric is abnormal"
    assert outcome.result.tool_name == "metric_inspect"


def test_expert_step_no_relevant_tool_needs_more(profiles, scenario_registry):
    registry = scenario_registry()
    optimization = next(p for p in profiles if p.agent_id == "optimization_expert")
    task = DiagnosisTask("t1", optimization.agent_id,
                         "completely unrelated gardening request")
    outcome = expert_step(task, None, registry, ToolSession("s"), optimization)
    assert outcome.kind == "needs_more"


def test_expert_step_handoff_via_script(profiles, trees, scenario_registry, demo_llm):
    registry = scenario_registry("high_io")
    resource = next(p for p in profiles if p.agent_id == "resource_expert")
    high_io = next(t for t in trees if t.tree_id == "high_io")
    task = decompose_tasks("Abnormal I/O Usage", resource, high_io)[1]
    outcome = expert_step(task, demo_llm, registry, ToolSession("s"), resource)
    assert outcome.kind == "handoff"
    assert outcome.to_agent == "component_expert"


def test_expert_step_confinement(profiles, scenario_registry, demo_llm):
    # instruction names a tool outside the expert's set; selection must stay inside
    registry = scenario_registry("high_io")
    optimization = next(p for p in profiles if p.agent_id == "optimization_expert")
    task = DiagnosisTask("t1", optimization.agent_id,
                         "recommend indexes to optimize sql='SELECT 1' db=bankdb")
    outcome = expert_step(task, demo_llm, registry, ToolSession("s"), optimization)
    assert outcome.result is not None
    assert outcome.result.tool_name in optimization.allowed_tools


# ------------------------------------------------------------------ cross review

def test_cross_review_recruits_absent_expert(profiles, trees, scenario_registry):
    registry = scenario_registry("high_io")
    engine = DiagnosisEngine("Abnormal I/O Usage",
                             config(profiles, registry, trees))
    engine._prepare()
    assert "component_expert" not in engine._recruit_order
    message = CrossReviewMessage(
        from_agent="resource_expert", to_agent="component_expert",
        payload="slow SQL suspected",
        suggested_tasks=[DiagnosisTask("x1", "component_expert", "analyze slow sql")])
    engine.cross_review(message)
    assert "component_expert" in engine._recruit_order
    assert engine._queues["component_expert"][0].task_id == "x1"


def test_cross_review_self_message_rejected():
    with pytest.raises(ValueError):
        CrossReviewMessage(from_agent="a", to_agent="a", payload="p")


# ------------------------------------------------------------------ end to end

def test_run_diagnosis_high_io_end_to_end(profiles, trees, scenario_registry, demo_llm):
    registry = scenario_registry("high_io")
    report = run_diagnosis("Abnormal I/O Usage",
                           config(profiles, registry, trees, llm=demo_llm))
    assert report.status == "complete"
    assert "Resource Expert" in report.recruited_experts
    assert "Component Expert" in report.recruited_experts
    tool_order = [e["tool"] for e in report.trace if e["event"] == "tool_call"]
    assert tool_order == ["metric_inspect", "io_topk_process", "slow_sql_rca"]
    assert report.root_causes
    cause = report.root_causes[0]
    assert "579485408" in cause.cause and "920833563" in cause.cause
    assert "index" in cause.recommendation
    assert cause.evidence_task_ids
    evidence_ids = {e.task_id for e in report.evidence}
    for rc in report.root_causes:
        assert set(rc.evidence_task_ids) <= evidence_ids


def test_run_diagnosis_free_exploration(profiles, scenario_registry):
    from dbcopilot.llm import ScriptRule

    registry = scenario_registry("default")
    llm = ScriptedBackend([
        ScriptRule(trigger="memory usage breakdown",
                   response="CONCLUDED: memory stable, no leak"),
    ], default="CONCLUDED: nothing further")
    report = run_diagnosis(
        "memory usage breakdown needed on dn_6001",
        config(profiles, registry, [], llm=llm))
    assert report.report_id.startswith("diag-")
    assert report.trace[0] == {"event": "tree_matched", "tree": None, "cases": []}
    assert report.expert_summaries


def test_run_diagnosis_round_limit_zero(profiles, trees, scenario_registry):
    registry = scenario_registry("high_io")
    report = run_diagnosis("Abnormal I/O Usage",
                           config(profiles, registry, trees, round_limit=0))
    assert report.status == "inconclusive"
    assert report.root_causes == []
    assert "No root cause identified." in report.to_markdown()


def test_run_diagnosis_empty_alert(profiles, trees, scenario_registry):
    registry = scenario_registry()
    with pytest.raises(EmptyAlert):
        run_diagnosis("", config(profiles, registry, trees))


def test_engine_pause_and_resume(profiles, trees, scenario_registry, demo_llm):
    registry = scenario_registry("lock_contention")
    engine = DiagnosisEngine("Lock contention reported by monitoring",
                             config(profiles, registry, trees, llm=demo_llm),
                             session=ToolSession("sess-1"))
    state = engine.run_until_blocked()
    assert state == "awaiting_params"
    assert [p.name for p in engine.pending_params] == ["db_name"]
    state = engine.resume({"db_name": "bankdb"})
    assert state == "done"
    assert engine.report is not None
    assert engine.report.root_causes
    assert "88421" in engine.report.root_causes[0].cause


def test_run_diagnosis_raises_without_session_feeder(profiles, trees, scenario_registry):
    registry = scenario_registry("lock_contention")
    with pytest.raises(MissingParamsError):
        run_diagnosis("Lock contention reported",
                      config(profiles, registry, trees))


def test_determinism_two_runs(profiles, trees, scenario_registry, demo_llm):
    registry = scenario_registry("high_io")
    reports = [
        run_diagnosis("Abnormal I/O Usage",
                      config(profiles, registry, trees, llm=demo_llm))
        for _ in range(2)
    ]
    assert json.dumps(reports[0].trace) == json.dumps(reports[1].trace)
    assert reports[0].report_id == reports[1].report_id


def test_tool_confinement_across_trace(profiles, trees, scenario_registry, demo_llm):
    registry = scenario_registry("high_io")
    report = run_diagnosis("Abnormal I/O Usage",
                           config(profiles, registry, trees, llm=demo_llm))
    allowed = {p.agent_id: set(p.allowed_tools) for p in profiles}
    for event in report.trace:
        if event["event"] == "tool_call":
            assert event["tool"] in allowed[event["agent"]]


# ------------------------------------------------------------------ aggregation

def test_summary_prompt_carries_family_guideline(profiles, trees, scenario_registry):
    registry = scenario_registry("high_io")

    class Recorder(Backend):
        def __init__(self):
            self.system_prompts = []

        def complete(self, messages):
            self.system_prompts.append(messages[0].content)
            user = messages[-1].content
            if "metric_inspect" in user:
                return "CONCLUDED: abnormal metric confirmed"
            if "io_topk_process" in user:
                return "CONCLUDED: gaussdb dominates I/O"
            if "summarize" in user:
                return "summary text"
            return "CONCLUDED: done"

    recorder = Recorder()
    run_diagnosis("Abnormal I/O Usage",
                  config(profiles, registry, trees, llm=recorder))
    summary_prompts = [p for p in recorder.system_prompts if "Summarize" in p]
    assert summary_prompts
    assert all(FAMILY_GUIDELINES["io"] in p for p in summary_prompts)


def test_report_markdown_lint(profiles, trees, scenario_registry, demo_llm):
    registry = scenario_registry("high_io")
    report = run_diagnosis("Abnormal I/O Usage",
                           config(profiles, registry, trees, llm=demo_llm))
    rendered = report.to_markdown()
    assert markdown_lint(rendered) == []
    assert "| ts | os_disk_ioutils |" in rendered


def test_aggregate_rerender(profiles, trees, scenario_registry, demo_llm):
    registry = scenario_registry("high_io")
    engine = DiagnosisEngine("Abnormal I/O Usage",
                             config(profiles, registry, trees, llm=demo_llm))
    engine.run_until_blocked()
    first = engine.report
    again = aggregate_and_render(engine)
    assert again.root_causes[0].cause == first.root_causes[0].cause
