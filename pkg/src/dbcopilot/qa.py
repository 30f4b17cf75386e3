"""Safety-gated retrieval-augmented answering with source attribution.

Pipeline order is fixed: pre-check, question expansion, hybrid retrieval,
prompt assembly, generation, post-check. Either safety check short-circuits
to the refusal constant; the post-check runs the identical detector and
classifier over the generated text so nothing risky leaves the system.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

from . import router
from .errors import UnknownAnswerId
from .kb import KnowledgeBase
from .llm import Backend, ChatMessage
from .retrieval import Retriever, ScoredChunk
from .safety import CheckStage, SafetyGate, refusal_response, safety_prompt

PROMPT_VERSION = "qa-prompt/1"
SYSTEM_PROMPT = (
    "You are a database maintenance assistant for GaussDB operators. "
    "Answer concisely in markdown."
)
CONTEXT_CHUNKS = 6
CONTEXT_CHARS = 6000

STAGES = ("safety.pre", "router.expand", "retrieval.retrieve",
          "prompt.assemble", "llm.complete", "safety.post")

FEEDBACK_VERDICTS = ("helpful", "missing_solution")


@dataclass
class SourceRef:
    chunk_id: str
    score: float
    source: str
    version_tag: str

    def to_dict(self) -> dict:
        return {"chunk_id": self.chunk_id, "score": self.score,
                "source": self.source, "version_tag": self.version_tag}


@dataclass
class Answer:
    answer_id: str
    text: str
    sources: list[SourceRef]
    refused: bool
    trace: list[str]

    def to_dict(self) -> dict:
        return {"answer_id": self.answer_id, "text": self.text,
                "sources": [s.to_dict() for s in self.sources],
                "refused": self.refused, "trace": self.trace}


@dataclass
class FeedbackRecord:
    answer_id: str
    verdict: str
    note: str
    ts: float


def build_user_prompt(question: str, chunks: list[tuple[str, str]]) -> str:
    context = "\n".join(f"[{chunk_id}] {text}" for chunk_id, text in chunks)
    if not context:
        context = "(no supporting documents found)"
    return (f"Context:\n{context}\n\nQuestion: {question}\n"
            f"Answer using only the context; cite chunk ids in square brackets.")


class QaService:
    """Answering plus feedback capture over one immutable knowledge base."""

    def __init__(self, kb: KnowledgeBase, llm: Backend, gate: SafetyGate,
                 synonyms: dict[str, list[str]] | None = None,
                 feedback_path: str | Path | None = None,
                 retriever: Retriever | None = None):
        self.kb = kb
        self.llm = llm
        self.gate = gate
        self.synonyms = synonyms or {}
        self.feedback_path = Path(feedback_path) if feedback_path else None
        self.retriever = retriever or Retriever(kb)
        self._answers: dict[str, Answer] = {}

    def _register(self, answer: Answer) -> Answer:
        self._answers[answer.answer_id] = answer
        return answer

    def _refusal(self, trace: list[str]) -> Answer:
        return self._register(Answer(
            answer_id=uuid.uuid4().hex[:12],
            text=refusal_response(),
            sources=[],
            refused=True,
            trace=trace,
        ))

    def answer_question(self, question: str, k: int = CONTEXT_CHUNKS) -> Answer:
        trace: list[str] = ["safety.pre"]
        if self.gate.check(question, CheckStage.PRE_QUESTION).blocked:
            return self._refusal(trace)

        trace.append("router.expand")
        variants = router.expand_question(question, self.synonyms)

        trace.append("retrieval.retrieve")
        results = self.retriever.retrieve(question, k, variants=variants[1:])

        trace.append("prompt.assemble")
        picked: list[ScoredChunk] = results[:CONTEXT_CHUNKS]
        while len(picked) > 1 and sum(len(self.kb.by_id[i.chunk_id].text)
                                      for i in picked) > CONTEXT_CHARS:
            picked.pop()  # drop lowest-ranked first to fit the budget
        context_chunks: list[tuple[str, str]] = []
        sources: list[SourceRef] = []
        for item in picked:
            chunk = self.kb.by_id[item.chunk_id]
            context_chunks.append((chunk.chunk_id, chunk.text))
            sources.append(SourceRef(chunk.chunk_id, item.score,
                                     chunk.source, chunk.version_tag))
        preamble = "" if context_chunks else "No supporting documents found. "
        messages = [
            ChatMessage("system", safety_prompt(SYSTEM_PROMPT)),
            ChatMessage("user", build_user_prompt(question, context_chunks)),
        ]

        trace.append("llm.complete")
        completion = self.llm.complete(messages)

        trace.append("safety.post")
        if self.gate.check(completion, CheckStage.POST_ANSWER).blocked:
            return self._refusal(trace)

        return self._register(Answer(
            answer_id=uuid.uuid4().hex[:12],
            text=preamble + completion,
            sources=sources,
            refused=False,
            trace=trace,
        ))

    # -- feedback ------------------------------------------------------------

    def record_feedback(self, answer_id: str, verdict: str,
                        note: str = "") -> FeedbackRecord:
        if answer_id not in self._answers:
            raise UnknownAnswerId(answer_id)
        if verdict not in FEEDBACK_VERDICTS:
            raise ValueError(f"verdict must be one of {FEEDBACK_VERDICTS}")
        record = FeedbackRecord(answer_id=answer_id, verdict=verdict,
                                note=note, ts=time.time())
        if self.feedback_path is not None:
            line = json.dumps({"answer_id": record.answer_id,
                               "verdict": record.verdict,
                               "note": record.note, "ts": record.ts},
                              ensure_ascii=False)
            with self.feedback_path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
        return record

    def feedback_for(self, answer_id: str) -> list[FeedbackRecord]:
        if self.feedback_path is None or not self.feedback_path.exists():
            return []
        records = []
        for line in self.feedback_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            raw = json.loads(line)
            if raw["answer_id"] == answer_id:
                records.append(FeedbackRecord(**raw))
        return records

    def get_answer(self, answer_id: str) -> Answer | None:
        return self._answers.get(answer_id)
