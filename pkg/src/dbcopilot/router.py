"""Question pre-processing: expansion, decomposition, intent routing.

Rules run first and are sufficient on their own; the LLM is only consulted
where rules do not fire, so the router stays fully deterministic when no
backend is configured.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .llm import Backend, ChatMessage

MAX_VARIANTS = 8
MAX_LLM_REPHRASINGS = 2

DIAGNOSIS_KEYWORDS = (
    "alert", "anomaly", "anomalies", "abnormal", "diagnose", "diagnosis",
    "troubleshoot", "root cause",
)
DIAGNOSIS_PHRASES = (
    "high cpu", "high i/o", "high io", "high memory", "cpu usage", "i/o usage",
    "io usage", "memory usage", "disk usage", "slow sql", "slow query",
    "lock wait", "lock contention",
)

CONJUNCTIONS = (" and also ", " and then ", " as well as ", "; ")

INTENT_PROMPT = (
    "Classify the user message as either a product knowledge question or a "
    "database anomaly to diagnose. Reply with exactly one word: QA or DIAGNOSIS."
)

REPHRASE_PROMPT = (
    "Rephrase the following database question two ways, one per line, "
    "keeping the technical meaning unchanged."
)


class Intent(str, Enum):
    QA = "qa"
    DIAGNOSIS = "diagnosis"


class IntentSource(str, Enum):
    RULE = "rule"
    LLM = "llm"


@dataclass
class ProcessedQuestion:
    original: str
    variants: list[str]
    sub_queries: list[str]
    intent: Intent
    intent_source: IntentSource = IntentSource.RULE


def load_synonym_table(path: str | Path) -> dict[str, list[str]]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def expand_question(question: str, synonym_table: dict[str, list[str]],
                    llm: Backend | None = None) -> list[str]:
    """Original first, then one variant per (term, synonym) substitution,
    then up to two LLM rephrasings; duplicates removed, capped at 8."""
    variants = [question]
    for term, synonyms in sorted(synonym_table.items()):
        pattern = re.compile(r"\b" + re.escape(term) + r"\b", re.IGNORECASE)
        if not pattern.search(question):
            continue
        for synonym in synonyms:
            candidate = pattern.sub(synonym, question)
            if candidate not in variants:
                variants.append(candidate)
    if llm is not None:
        try:
            reply = llm.complete([
                ChatMessage("system", REPHRASE_PROMPT),
                ChatMessage("user", question),
            ])
            for line in reply.splitlines()[:MAX_LLM_REPHRASINGS]:
                line = line.strip()
                if line and line not in variants:
                    variants.append(line)
        except Exception:
            pass  # expansion is best-effort; the original always survives
    return variants[:MAX_VARIANTS]


def decompose(question: str, llm: Backend | None = None) -> list[str]:
    """Split on question marks and explicit conjunctions; LLM refines only
    when the rules find a single clause."""
    pieces = [p.strip() for p in question.split("?")]
    clauses: list[str] = []
    for i, piece in enumerate(pieces):
        if not piece:
            continue
        restore = "?" if i < len(pieces) - 1 else ""
        parts = [piece]
        for conj in CONJUNCTIONS:
            parts = [sub for part in parts for sub in part.split(conj)]
        parts = [p.strip() for p in parts if p.strip()]
        for j, part in enumerate(parts):
            clauses.append(part + (restore if j == len(parts) - 1 else ""))
    if len(clauses) > 1:
        return clauses
    if llm is not None:
        try:
            reply = llm.complete([
                ChatMessage("system", "Decompose the question into independent "
                                      "sub-questions, one per line. If it is already "
                                      "atomic, repeat it unchanged."),
                ChatMessage("user", question),
            ])
            lines = [ln.strip() for ln in reply.splitlines() if ln.strip()]
            if lines:
                return lines
        except Exception:
            pass
    return [question] if question else [""]


def route_intent(question: str, llm: Backend | None = None) -> tuple[Intent, IntentSource]:
    """Rule pre-pass on alert-style wording; otherwise ask the LLM for a
    one-word verdict; anything unparseable routes to QA (side-effect free)."""
    lowered = question.lower()
    tokens = set(re.findall(r"[^\W_]+", lowered))
    if any(kw in tokens for kw in DIAGNOSIS_KEYWORDS if " " not in kw) or \
       any(phrase in lowered for phrase in DIAGNOSIS_KEYWORDS if " " in phrase) or \
       any(phrase in lowered for phrase in DIAGNOSIS_PHRASES):
        return Intent.DIAGNOSIS, IntentSource.RULE
    if llm is not None:
        try:
            reply = llm.complete([
                ChatMessage("system", INTENT_PROMPT),
                ChatMessage("user", question),
            ]).strip().upper()
        except Exception:
            return Intent.QA, IntentSource.RULE
        if reply.startswith("DIAGNOSIS"):
            return Intent.DIAGNOSIS, IntentSource.LLM
        if reply.startswith("QA"):
            return Intent.QA, IntentSource.LLM
    return Intent.QA, IntentSource.RULE


def process_question(question: str, synonym_table: dict[str, list[str]] | None = None,
                     llm: Backend | None = None) -> ProcessedQuestion:
    intent, source = route_intent(question, llm)
    return ProcessedQuestion(
        original=question,
        variants=expand_question(question, synonym_table or {}, llm),
        sub_queries=decompose(question, llm),
        intent=intent,
        intent_source=source,
    )
