"""Desk-scale evaluation harness: tool-invocation accuracy and
answer-quality distribution over JSON-Lines fixtures.

Judging is deterministic: tool selection is correct when the expected
tool ranks first, parameter filling when the bound arguments equal the
expected ones exactly, and answers are labeled by a contains-check judge
(or any callable with the same signature). Accuracies are exact rational
counts; re-runs over the same fixtures give identical per-case verdicts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyEvalSet
from .llm import Backend
from .qa import Answer, QaService
from .retrieval import tokenize
from .tools import BoundArguments, ToolRegistry, fill_parameters, select_tools

ANSWER_LABELS = ("high", "partial", "poor", "unsafe")


@dataclass
class ToolEvalCase:
    case_id: str
    context_text: str
    expected_tool: str
    expected_args: dict[str, object] = field(default_factory=dict)
    has_params: bool = False


@dataclass
class AnswerEvalCase:
    case_id: str
    question: str
    standard_answer: str
    judge_mode: str = "exact_contains"  # exact_contains | scripted_llm
    expect_refusal: bool = False


def load_tool_cases(path: str | Path) -> list[ToolEvalCase]:
    cases = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        cases.append(ToolEvalCase(
            case_id=raw["case_id"],
            context_text=raw["context_text"],
            expected_tool=raw["expected_tool"],
            expected_args=raw.get("expected_args", {}),
            has_params=bool(raw.get("has_params", False)),
        ))
    return cases


def load_answer_cases(path: str | Path) -> list[AnswerEvalCase]:
    cases = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        cases.append(AnswerEvalCase(
            case_id=raw["case_id"],
            question=raw["question"],
            standard_answer=raw["standard_answer"],
            judge_mode=raw.get("judge_mode", "exact_contains"),
            expect_refusal=bool(raw.get("expect_refusal", False)),
        ))
    return cases


# ---------------------------------------------------------------------------
# tool invocation

def eval_tool_invocation(cases: list[ToolEvalCase], registry: ToolRegistry,
                         llm: Backend | None = None) -> dict:
    """Selection is correct iff the expected tool ranks first; parameters
    are correct iff extraction binds exactly the expected arguments (cases
    without parameters count as vacuously correct for the param metric)."""
    if not cases:
        raise EmptyEvalSet("no tool evaluation cases")
    per_case = []
    selection_hits = 0
    param_hits = 0
    for case in sorted(cases, key=lambda c: c.case_id):
        ranked = select_tools(case.context_text, registry, k=3)
        selected = ranked[0].name if ranked else None
        selection_ok = selected == case.expected_tool

        params_ok = True
        bound: dict[str, object] | None = None
        if case.has_params:
            descriptor = registry.get(case.expected_tool)
            if descriptor is None:
                params_ok = False
            else:
                binding = fill_parameters(descriptor, case.context_text, llm=llm)
                bound = binding.values if isinstance(binding, BoundArguments) else None
                params_ok = bound == case.expected_args

        selection_hits += selection_ok
        param_hits += params_ok
        per_case.append({
            "case_id": case.case_id,
            "expected_tool": case.expected_tool,
            "selected_tool": selected,
            "selection_ok": selection_ok,
            "bound_args": bound,
            "params_ok": params_ok,
        })
    return {
        "selection_accuracy": selection_hits / len(cases),
        "param_fill_accuracy": param_hits / len(cases),
        "per_case": per_case,
    }


# ---------------------------------------------------------------------------
# answer quality

def contains_judge(case: AnswerEvalCase, answer: Answer) -> str:
    """Deterministic judge: refusals are high quality iff expected, an
    answer containing the standard phrase is high, half the phrase tokens
    make it partial, anything else is poor."""
    if answer.refused:
        return "high" if case.expect_refusal else "unsafe"
    if case.expect_refusal:
        return "unsafe"
    text = answer.text.lower()
    if case.standard_answer.lower() in text:
        return "high"
    tokens = tokenize(case.standard_answer)
    if tokens:
        present = sum(1 for t in tokens if t in text)
        if present / len(tokens) >= 0.5:
            return "partial"
    return "poor"


def eval_answers(cases: list[AnswerEvalCase], pipeline: QaService,
                 judge=None) -> dict:
    if not cases:
        raise EmptyEvalSet("no answer evaluation cases")
    judge = judge or contains_judge
    distribution = {label: 0 for label in ANSWER_LABELS}
    per_case = []
    for case in sorted(cases, key=lambda c: c.case_id):
        answer = pipeline.answer_question(case.question)
        label = judge(case, answer)
        distribution[label] += 1
        per_case.append({"case_id": case.case_id, "label": label,
                         "refused": answer.refused})
    return {
        "high_quality_ratio": distribution["high"] / len(cases),
        "distribution": distribution,
        "per_case": per_case,
    }


def format_tool_report(result: dict) -> str:
    lines = [
        f"selection_accuracy: {result['selection_accuracy']:.4f}",
        f"param_fill_accuracy: {result['param_fill_accuracy']:.4f}",
    ]
    misses = [c for c in result["per_case"] if not (c["selection_ok"] and c["params_ok"])]
    if misses:
        lines.append("misses:")
        for c in misses:
            lines.append(f"  {c['case_id']}: selected={c['selected_tool']} "
                         f"params_ok={c['params_ok']}")
    return "\n".join(lines)


def format_answer_report(result: dict) -> str:
    lines = [f"high_quality_ratio: {result['high_quality_ratio']:.4f}"]
    for label, count in result["distribution"].items():
        lines.append(f"  {label}: {count}")
    return "\n".join(lines)
